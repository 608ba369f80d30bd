#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridfit/errors.hpp"
#include "gridfit/vec3.hpp"

namespace gridfit {

// Reverse-mode accumulator for d(loss)/d(node value). Entries are stored
// densely but tracked sparsely through an epoch stamp, so clear() is O(#touched)
// and iteration visits only nodes that actually received a deposit.
class GradBuffer {
 public:
  explicit GradBuffer(std::size_t n) : val_(n, 0.0), stamp_(n, 0) {}

  std::size_t size() const { return val_.size(); }

  void clear() {
    touched_.clear();
    if (++epoch_ == 0) {  // stamp wraparound: reset once every 2^32 clears
      std::fill(stamp_.begin(), stamp_.end(), 0u);
      epoch_ = 1;
    }
  }

  void add(std::uint32_t i, double v) {
    if (stamp_[i] != epoch_) {
      stamp_[i] = epoch_;
      val_[i] = v;
      touched_.push_back(i);
    } else {
      val_[i] += v;
    }
  }

  double get(std::uint32_t i) const { return stamp_[i] == epoch_ ? val_[i] : 0.0; }

  void set_zero(std::uint32_t i) {
    if (stamp_[i] == epoch_) val_[i] = 0.0;
  }

  // Adds every touched entry of other into this buffer, in other's deposit
  // order. Used to fold per-worker buffers together deterministically.
  void merge(const GradBuffer& other) {
    for (std::uint32_t i : other.touched_) add(i, other.val_[i]);
  }

  const std::vector<std::uint32_t>& touched() const { return touched_; }

 private:
  std::vector<double> val_;
  std::vector<std::uint32_t> stamp_;
  std::vector<std::uint32_t> touched_;
  std::uint32_t epoch_ = 1;
};

// Voxels kept for optimization (those near the current zero level) and the
// nodes they touch. Node values outside the set are frozen.
struct ActiveSet {
  int res = 0;
  std::vector<std::uint32_t> voxels;     // linear voxel ids, ascending
  std::vector<std::uint32_t> nodes;      // linear node ids, ascending
  std::vector<std::uint8_t> voxel_mask;  // res^3
  std::vector<std::uint8_t> node_mask;   // (res+1)^3

  bool empty() const { return voxels.empty(); }
};

// Scalar field sampled at the nodes of a regular lattice over [0,1]^3 and
// extended by trilinear interpolation inside each voxel. `res` counts cells
// per axis, so there are (res+1)^3 nodes and h = 1/res.
//
// Node (i,j,k) sits at (i*h, j*h, k*h); storage is a flat array with k the
// fastest index. All arithmetic is double precision.
class ScalarGrid {
 public:
  explicit ScalarGrid(int res, double fill = 0.0)
      : res_(check_res(res)),
        h_(1.0 / res),
        values_(static_cast<std::size_t>(res + 1) * (res + 1) * (res + 1), fill) {}

  int res() const { return res_; }
  double h() const { return h_; }
  int nodes_per_axis() const { return res_ + 1; }
  std::size_t node_count() const { return values_.size(); }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(res_) * res_ * res_;
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::uint32_t node_id(int i, int j, int k) const {
    return static_cast<std::uint32_t>((static_cast<std::size_t>(i) * (res_ + 1) + j) * (res_ + 1) + k);
  }
  std::uint32_t voxel_id(int i, int j, int k) const {
    return static_cast<std::uint32_t>((static_cast<std::size_t>(i) * res_ + j) * res_ + k);
  }
  void node_coords(std::uint32_t id, int& i, int& j, int& k) const {
    int n = res_ + 1;
    k = static_cast<int>(id % n);
    j = static_cast<int>((id / n) % n);
    i = static_cast<int>(id / (static_cast<std::size_t>(n) * n));
  }
  void voxel_coords(std::uint32_t id, int& i, int& j, int& k) const {
    k = static_cast<int>(id % res_);
    j = static_cast<int>((id / res_) % res_);
    i = static_cast<int>(id / (static_cast<std::size_t>(res_) * res_));
  }

  double value(int i, int j, int k) const { return values_[node_id(i, j, k)]; }
  double& value(int i, int j, int k) { return values_[node_id(i, j, k)]; }

  Vec3 node_pos(int i, int j, int k) const { return {i * h_, j * h_, k * h_}; }
  Vec3 voxel_center(int i, int j, int k) const {
    return {(i + 0.5) * h_, (j + 0.5) * h_, (k + 0.5) * h_};
  }

  bool node_interior(int i, int j, int k) const {
    return i >= 1 && i <= res_ - 1 && j >= 1 && j <= res_ - 1 && k >= 1 && k <= res_ - 1;
  }

  /// Trilinear interpolation at p in [0,1]^3. Exact for fields affine in
  /// (x,y,z); a constant grid evaluates to the constant bit-exactly.
  double eval(const Vec3& p) const {
    Cell c = locate(p);
    const double* f = corner(c);
    double c00 = lerp(f[idx(0, 0, 0)], f[idx(1, 0, 0)], c.tx);
    double c10 = lerp(f[idx(0, 1, 0)], f[idx(1, 1, 0)], c.tx);
    double c01 = lerp(f[idx(0, 0, 1)], f[idx(1, 0, 1)], c.tx);
    double c11 = lerp(f[idx(0, 1, 1)], f[idx(1, 1, 1)], c.tx);
    return lerp(lerp(c00, c10, c.ty), lerp(c01, c11, c.ty), c.tz);
  }

  /// Gradient of the trilinear interpolant at p. Discontinuous across voxel
  /// faces; a query exactly on a shared face is resolved by the voxel with
  /// the smaller index along the ambiguous axis.
  Vec3 grad_at(const Vec3& p) const {
    Cell c = locate(p);
    return cell_grad(c);
  }

  /// Gradient at the center of voxel (i,j,k): (1/4h) * sum over corners of
  /// f_c * (sx, sy, sz), where the sign is + when the corner sits at the
  /// positive end of that axis. Bit-identical to grad_at at the center point.
  Vec3 center_grad(int i, int j, int k) const {
    check_voxel(i, j, k);
    Cell c{i, j, k, 0.5, 0.5, 0.5};
    return cell_grad(c);
  }

  /// Symmetric finite-difference gradient at an interior node.
  Vec3 node_grad(int i, int j, int k) const {
    check_interior(i, j, k);
    double inv2h = 0.5 * res_;
    return {(value(i + 1, j, k) - value(i - 1, j, k)) * inv2h,
            (value(i, j + 1, k) - value(i, j - 1, k)) * inv2h,
            (value(i, j, k + 1) - value(i, j, k - 1)) * inv2h};
  }

  /// Symmetric finite-difference Laplacian at an interior node.
  double node_laplacian(int i, int j, int k) const {
    check_interior(i, j, k);
    double invh2 = static_cast<double>(res_) * res_;
    double v = value(i, j, k);
    double dxx = value(i + 1, j, k) - 2.0 * v + value(i - 1, j, k);
    double dyy = value(i, j + 1, k) - 2.0 * v + value(i, j - 1, k);
    double dzz = value(i, j, k + 1) - 2.0 * v + value(i, j, k - 1);
    return (dxx + dyy + dzz) * invh2;
  }

  // --- adjoints -----------------------------------------------------------
  // Every forward op above is linear in the node values, so each adjoint
  // scatters the op's fixed coefficients times `upstream` into the touched
  // nodes of buf.

  void eval_adjoint(const Vec3& p, double upstream, GradBuffer& buf) const {
    Cell c = locate(p);
    double wx[2] = {1.0 - c.tx, c.tx};
    double wy[2] = {1.0 - c.ty, c.ty};
    double wz[2] = {1.0 - c.tz, c.tz};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int d = 0; d < 2; ++d)
          buf.add(node_id(c.i + a, c.j + b, c.k + d), upstream * wx[a] * wy[b] * wz[d]);
  }

  void grad_at_adjoint(const Vec3& p, const Vec3& upstream, GradBuffer& buf) const {
    Cell c = locate(p);
    cell_grad_adjoint(c, upstream, buf);
  }

  void center_grad_adjoint(int i, int j, int k, const Vec3& upstream, GradBuffer& buf) const {
    check_voxel(i, j, k);
    Cell c{i, j, k, 0.5, 0.5, 0.5};
    cell_grad_adjoint(c, upstream, buf);
  }

  void node_grad_adjoint(int i, int j, int k, const Vec3& upstream, GradBuffer& buf) const {
    check_interior(i, j, k);
    double inv2h = 0.5 * res_;
    buf.add(node_id(i + 1, j, k), upstream.x * inv2h);
    buf.add(node_id(i - 1, j, k), -upstream.x * inv2h);
    buf.add(node_id(i, j + 1, k), upstream.y * inv2h);
    buf.add(node_id(i, j - 1, k), -upstream.y * inv2h);
    buf.add(node_id(i, j, k + 1), upstream.z * inv2h);
    buf.add(node_id(i, j, k - 1), -upstream.z * inv2h);
  }

  void node_laplacian_adjoint(int i, int j, int k, double upstream, GradBuffer& buf) const {
    check_interior(i, j, k);
    double invh2 = static_cast<double>(res_) * res_;
    double u = upstream * invh2;
    buf.add(node_id(i + 1, j, k), u);
    buf.add(node_id(i - 1, j, k), u);
    buf.add(node_id(i, j + 1, k), u);
    buf.add(node_id(i, j - 1, k), u);
    buf.add(node_id(i, j, k + 1), u);
    buf.add(node_id(i, j, k - 1), u);
    buf.add(node_id(i, j, k), -6.0 * u);
  }

  // --- coarse-to-fine -----------------------------------------------------

  /// Doubles the resolution. Coarse nodes copy bit-exactly to even fine
  /// indices; odd indices average the 2/4/8 bracketing coarse nodes, which
  /// is trilinear interpolation at those points.
  ScalarGrid upsample() const {
    ScalarGrid fine(2 * res_);
    int n = fine.nodes_per_axis();
    for (int i = 0; i < n; ++i) {
      int ilo = i >> 1, ihi = (i + 1) >> 1;
      for (int j = 0; j < n; ++j) {
        int jlo = j >> 1, jhi = (j + 1) >> 1;
        for (int k = 0; k < n; ++k) {
          int klo = k >> 1, khi = (k + 1) >> 1;
          if (ilo == ihi && jlo == jhi && klo == khi) {
            fine.value(i, j, k) = value(ilo, jlo, klo);
            continue;
          }
          double sum = 0.0;
          int cnt = 0;
          for (int a = ilo; a <= ihi; ++a)
            for (int b = jlo; b <= jhi; ++b)
              for (int d = klo; d <= khi; ++d) {
                sum += value(a, b, d);
                ++cnt;
              }
          fine.value(i, j, k) = sum / cnt;
        }
      }
    }
    return fine;
  }

  /// Keeps every voxel with at least one corner value of magnitude <= t.
  ActiveSet prune(double t) const {
    if (!(t > 0.0)) throw std::invalid_argument("prune threshold must be positive");
    ActiveSet set;
    set.res = res_;
    set.voxel_mask.assign(voxel_count(), 0);
    set.node_mask.assign(node_count(), 0);
    for (int i = 0; i < res_; ++i)
      for (int j = 0; j < res_; ++j)
        for (int k = 0; k < res_; ++k) {
          bool keep = false;
          for (int a = 0; a < 2 && !keep; ++a)
            for (int b = 0; b < 2 && !keep; ++b)
              for (int d = 0; d < 2 && !keep; ++d)
                keep = std::abs(value(i + a, j + b, k + d)) <= t;
          if (!keep) continue;
          std::uint32_t vid = voxel_id(i, j, k);
          set.voxel_mask[vid] = 1;
          set.voxels.push_back(vid);
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              for (int d = 0; d < 2; ++d)
                set.node_mask[node_id(i + a, j + b, k + d)] = 1;
        }
    for (std::uint32_t id = 0; id < set.node_mask.size(); ++id)
      if (set.node_mask[id]) set.nodes.push_back(id);
    return set;
  }

  // --- snapshot i/o -------------------------------------------------------
  // Binary layout: "VSCG", u32 version, u32 res, then (res+1)^3 little-endian
  // float64 node values with k fastest.

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    const char magic[4] = {'V', 'S', 'C', 'G'};
    std::uint32_t version = 1, res32 = static_cast<std::uint32_t>(res_);
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&res32), 4);
    out.write(reinterpret_cast<const char*>(values_.data()),
              static_cast<std::streamsize>(values_.size() * sizeof(double)));
    if (!out) throw IoError("write failed: " + path);
  }

  static ScalarGrid load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4];
    std::uint32_t version = 0, res32 = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&res32), 4);
    if (!in || std::memcmp(magic, "VSCG", 4) != 0)
      throw ParseError("not a grid snapshot: " + path);
    if (version != 1)
      throw ParseError("unsupported snapshot version " + std::to_string(version));
    if (res32 == 0 || res32 > 4096)
      throw ParseError("implausible snapshot resolution " + std::to_string(res32));
    ScalarGrid g(static_cast<int>(res32));
    in.read(reinterpret_cast<char*>(g.values_.data()),
            static_cast<std::streamsize>(g.values_.size() * sizeof(double)));
    if (!in) throw ParseError("truncated snapshot: " + path);
    for (double v : g.values_)
      if (!std::isfinite(v)) throw ParseError("non-finite value in snapshot: " + path);
    return g;
  }

 private:
  struct Cell {
    int i, j, k;
    double tx, ty, tz;
  };

  static int check_res(int res) {
    if (res < 1) throw std::invalid_argument("grid resolution must be >= 1");
    return res;
  }

  static double lerp(double a, double b, double t) { return a + t * (b - a); }

  // Containing voxel and local coordinates. A coordinate exactly on a node
  // plane belongs to the lower-index voxel (t becomes 1 there).
  Cell locate(const Vec3& p) const {
    Cell c;
    locate_axis(p.x, c.i, c.tx);
    locate_axis(p.y, c.j, c.ty);
    locate_axis(p.z, c.k, c.tz);
    return c;
  }

  void locate_axis(double x, int& cell, double& t) const {
    if (!(x >= 0.0 && x <= 1.0))
      throw std::domain_error("point outside the unit cube");
    double s = x * res_;
    cell = static_cast<int>(s);
    if (cell >= res_) cell = res_ - 1;
    t = s - cell;
    if (t <= 0.0 && cell > 0) {
      cell -= 1;
      t = 1.0;
    }
  }

  // Corner value pointer and local offsets within a cell; idx(a,b,c) indexes
  // the 8 corners relative to corner(c).
  const double* corner(const Cell& c) const {
    return values_.data() + node_id(c.i, c.j, c.k);
  }
  std::size_t idx(int a, int b, int d) const {
    int n = res_ + 1;
    return (static_cast<std::size_t>(a) * n + b) * n + d;
  }

  Vec3 cell_grad(const Cell& c) const {
    const double* f = corner(c);
    double inv_h = static_cast<double>(res_);
    auto dx = [&](int b, int d) { return f[idx(1, b, d)] - f[idx(0, b, d)]; };
    auto dy = [&](int a, int d) { return f[idx(a, 1, d)] - f[idx(a, 0, d)]; };
    auto dz = [&](int a, int b) { return f[idx(a, b, 1)] - f[idx(a, b, 0)]; };
    double gx = lerp(lerp(dx(0, 0), dx(1, 0), c.ty), lerp(dx(0, 1), dx(1, 1), c.ty), c.tz);
    double gy = lerp(lerp(dy(0, 0), dy(1, 0), c.tx), lerp(dy(0, 1), dy(1, 1), c.tx), c.tz);
    double gz = lerp(lerp(dz(0, 0), dz(1, 0), c.tx), lerp(dz(0, 1), dz(1, 1), c.tx), c.ty);
    return Vec3{gx, gy, gz} * inv_h;
  }

  void cell_grad_adjoint(const Cell& c, const Vec3& up, GradBuffer& buf) const {
    double inv_h = static_cast<double>(res_);
    double wx[2] = {1.0 - c.tx, c.tx};
    double wy[2] = {1.0 - c.ty, c.ty};
    double wz[2] = {1.0 - c.tz, c.tz};
    double sx[2] = {-1.0, 1.0};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int d = 0; d < 2; ++d) {
          double g = up.x * sx[a] * wy[b] * wz[d] + up.y * wx[a] * sx[b] * wz[d] +
                     up.z * wx[a] * wy[b] * sx[d];
          buf.add(node_id(c.i + a, c.j + b, c.k + d), g * inv_h);
        }
  }

  void check_voxel(int i, int j, int k) const {
    if (i < 0 || j < 0 || k < 0 || i >= res_ || j >= res_ || k >= res_)
      throw std::out_of_range("voxel index out of range");
  }
  void check_interior(int i, int j, int k) const {
    if (!node_interior(i, j, k))
      throw std::out_of_range("stencil requires an interior node");
  }

  int res_;
  double h_;
  std::vector<double> values_;
};

}  // namespace gridfit
