#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridfit/errors.hpp"
#include "gridfit/extract.hpp"
#include "gridfit/vec3.hpp"

namespace gridfit {

inline double dist2(const Vec3& a, const Vec3& b) {
  double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

// Static median-split kd-tree for exact nearest-neighbor queries. Distances
// are computed with the same expression as a linear scan, so results match
// brute force bit for bit.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& pts) : pts_(pts) {
    if (pts_.empty()) throw InputError("KdTree: empty point set");
    std::vector<std::uint32_t> ids(pts_.size());
    for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
    nodes_.reserve(2 * pts_.size());
    root_ = build(ids.data(), ids.data() + ids.size());
  }

  // Returns {point index, squared distance}.
  std::pair<std::uint32_t, double> nearest(const Vec3& q) const {
    std::uint32_t best = nodes_[root_].pt;
    double best_d2 = dist2(q, pts_[best]);
    search(root_, q, best, best_d2);
    return {best, best_d2};
  }

 private:
  struct Node {
    std::uint32_t pt;
    std::int32_t left = -1, right = -1;
    std::uint8_t axis;
  };

  std::int32_t build(std::uint32_t* begin, std::uint32_t* end) {
    if (begin == end) return -1;
    Vec3 lo = pts_[*begin], hi = lo;
    for (auto* it = begin; it != end; ++it) {
      const Vec3& p = pts_[*it];
      lo.x = std::min(lo.x, p.x); hi.x = std::max(hi.x, p.x);
      lo.y = std::min(lo.y, p.y); hi.y = std::max(hi.y, p.y);
      lo.z = std::min(lo.z, p.z); hi.z = std::max(hi.z, p.z);
    }
    Vec3 span = hi - lo;
    std::uint8_t axis = 0;
    if (span.y > span[axis]) axis = 1;
    if (span.z > span[axis]) axis = 2;
    auto* mid = begin + (end - begin) / 2;
    std::nth_element(begin, mid, end, [&](std::uint32_t a, std::uint32_t b) {
      return pts_[a][axis] < pts_[b][axis];
    });
    Node n;
    n.pt = *mid;
    n.axis = axis;
    std::int32_t self = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(n);
    std::int32_t l = build(begin, mid);
    std::int32_t r = build(mid + 1, end);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  void search(std::int32_t ni, const Vec3& q, std::uint32_t& best, double& best_d2) const {
    const Node& n = nodes_[ni];
    double d2 = dist2(q, pts_[n.pt]);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = n.pt;
    }
    double delta = q[n.axis] - pts_[n.pt][n.axis];
    std::int32_t near = delta < 0 ? n.left : n.right;
    std::int32_t far = delta < 0 ? n.right : n.left;
    if (near >= 0) search(near, q, best, best_d2);
    if (far >= 0 && delta * delta <= best_d2) search(far, q, best, best_d2);
  }

  std::vector<Vec3> pts_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

// Point samples with per-point normals, as drawn from a mesh surface.
struct OrientedPoints {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
};

/// Uniform area-weighted surface sampling; each sample carries its face
/// normal (right-hand rule over the winding).
inline OrientedPoints sample_mesh(const TriMesh& mesh, std::size_t k, std::mt19937_64& rng) {
  if (mesh.empty()) throw InputError("sample_mesh: empty mesh");
  if (k < 1) throw InputError("sample_mesh: sample count must be >= 1");
  std::vector<double> cum(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tr = mesh.triangles[t];
    total += triangle_area(mesh.vertices[tr[0]], mesh.vertices[tr[1]], mesh.vertices[tr[2]]);
    cum[t] = total;
  }
  if (!(total > 0.0)) throw InputError("sample_mesh: mesh has zero area");

  OrientedPoints out;
  out.positions.reserve(k);
  out.normals.reserve(k);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::size_t s = 0; s < k; ++s) {
    double u = uni(rng) * total;
    std::size_t t = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
    if (t >= cum.size()) t = cum.size() - 1;
    const auto& tr = mesh.triangles[t];
    const Vec3 &a = mesh.vertices[tr[0]], &b = mesh.vertices[tr[1]], &c = mesh.vertices[tr[2]];
    double r1 = std::sqrt(uni(rng)), r2 = uni(rng);
    Vec3 p = (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c;
    out.positions.push_back(p);
    out.normals.push_back(normalized(cross(b - a, c - a)));
  }
  return out;
}

struct PairwiseDistances {
  double chamfer = 0.0;       // symmetric mean nearest-neighbor distance
  double hausdorff = 0.0;     // symmetric max
  double chamfer_one = 0.0;   // A -> B only
  double hausdorff_one = 0.0; // A -> B only
};

inline std::pair<double, double> directed_mean_max(const std::vector<Vec3>& from,
                                                   const KdTree& to) {
  double sum = 0.0, mx = 0.0;
  for (const Vec3& p : from) {
    double d = std::sqrt(to.nearest(p).second);
    sum += d;
    mx = std::max(mx, d);
  }
  return {sum / static_cast<double>(from.size()), mx};
}

/// Chamfer and Hausdorff distances between two point sets, plus the one-sided
/// A->B variants. Chamfer is the mean of plain euclidean nearest-neighbor
/// distances, symmetrized by averaging the two directions.
inline PairwiseDistances chamfer_hausdorff(const std::vector<Vec3>& a,
                                           const std::vector<Vec3>& b) {
  if (a.empty() || b.empty()) throw InputError("chamfer_hausdorff: empty point set");
  KdTree tree_b(b), tree_a(a);
  auto [mean_ab, max_ab] = directed_mean_max(a, tree_b);
  auto [mean_ba, max_ba] = directed_mean_max(b, tree_a);
  PairwiseDistances d;
  d.chamfer_one = mean_ab;
  d.hausdorff_one = max_ab;
  d.chamfer = 0.5 * (mean_ab + mean_ba);
  d.hausdorff = std::max(max_ab, max_ba);
  return d;
}

/// F-score in percent at distance threshold tau: harmonic mean of the
/// fraction of recon points within tau of gt (precision) and vice versa
/// (recall).
inline double f_score(const std::vector<Vec3>& recon, const std::vector<Vec3>& gt, double tau) {
  if (recon.empty() || gt.empty()) throw InputError("f_score: empty point set");
  if (!(tau > 0.0)) throw InputError("f_score: tau must be positive");
  double tau2 = tau * tau;
  KdTree tree_gt(gt), tree_recon(recon);
  std::size_t hit_p = 0, hit_r = 0;
  for (const Vec3& p : recon)
    if (tree_gt.nearest(p).second <= tau2) ++hit_p;
  for (const Vec3& p : gt)
    if (tree_recon.nearest(p).second <= tau2) ++hit_r;
  double precision = static_cast<double>(hit_p) / static_cast<double>(recon.size());
  double recall = static_cast<double>(hit_r) / static_cast<double>(gt.size());
  if (precision + recall == 0.0) return 0.0;
  return 200.0 * precision * recall / (precision + recall);
}

/// Normal consistency in [0, 100]: mean absolute dot product between each
/// point's normal and its nearest neighbor's normal, averaged over both
/// directions. Orientation-agnostic.
inline double normal_consistency(const OrientedPoints& recon, const OrientedPoints& gt) {
  if (recon.positions.empty() || gt.positions.empty())
    throw InputError("normal_consistency: empty point set");
  if (recon.normals.size() != recon.positions.size() || gt.normals.size() != gt.positions.size())
    throw InputError("normal_consistency: missing normals");
  KdTree tree_gt(gt.positions), tree_recon(recon.positions);
  double acc_a = 0.0, acc_b = 0.0;
  for (std::size_t i = 0; i < recon.positions.size(); ++i)
    acc_a += std::abs(dot(recon.normals[i], gt.normals[tree_gt.nearest(recon.positions[i]).first]));
  for (std::size_t i = 0; i < gt.positions.size(); ++i)
    acc_b += std::abs(dot(gt.normals[i], recon.normals[tree_recon.nearest(gt.positions[i]).first]));
  double mean = 0.5 * (acc_a / static_cast<double>(recon.positions.size()) +
                       acc_b / static_cast<double>(gt.positions.size()));
  return 100.0 * mean;
}

// Full evaluation record. Distances are stored in the units the inputs were
// given in ("original") and scaled into normalized unit-cube units when the
// normalization transform is known.
struct MetricReport {
  double d_c = 0.0, d_h = 0.0;              // vs ground truth, original units
  double d_c_one = 0.0, d_h_one = 0.0;      // mesh -> scan, original units
  double scale = 1.0;                       // original -> normalized
  double f_score = -1.0;                    // percent; -1 when not computed
  double ncs = -1.0;                        // x100;   -1 when not computed
  double tau = 0.01;
  std::size_t recon_samples = 0, gt_points = 0, scan_points = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["d_c"] = {{"original", d_c}, {"normalized", d_c * scale}};
    j["d_h"] = {{"original", d_h}, {"normalized", d_h * scale}};
    j["d_c_one_sided"] = {{"original", d_c_one}, {"normalized", d_c_one * scale}};
    j["d_h_one_sided"] = {{"original", d_h_one}, {"normalized", d_h_one * scale}};
    if (f_score >= 0) j["f_score"] = f_score;
    if (ncs >= 0) j["normal_consistency"] = ncs;
    j["tau"] = tau;
    j["counts"] = {{"recon_samples", recon_samples}, {"gt_points", gt_points},
                   {"scan_points", scan_points}};
    return j;
  }

  static std::string csv_header() {
    return "d_c,d_h,d_c_one_sided,d_h_one_sided,d_c_norm,d_h_norm,d_c_one_norm,d_h_one_norm,"
           "f_score,ncs,tau,recon_samples,gt_points,scan_points";
  }
  std::string csv_row() const {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%zu,%zu,%zu",
                  d_c, d_h, d_c_one, d_h_one, d_c * scale, d_h * scale, d_c_one * scale,
                  d_h_one * scale, f_score, ncs, tau, recon_samples, gt_points, scan_points);
    return buf;
  }
};

}  // namespace gridfit
