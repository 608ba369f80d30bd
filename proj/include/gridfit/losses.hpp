#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "json.hpp"

#include "gridfit/errors.hpp"
#include "gridfit/grid.hpp"
#include "gridfit/ingest.hpp"
#include "gridfit/parallel.hpp"

namespace gridfit {

// Loss weights and shape parameters. Defaults are the reference settings
// used for all full-scale runs.
struct LossConfig {
  double lambda_p = 0.1;    // squared field value at data points
  double lambda_n = 1e-5;   // gradient-vs-normal alignment at data points
  double lambda_v = 1e-4;   // viscosity-regularized eikonal residual
  double lambda_c = 1e-6;   // surface-area (coarea) penalty
  double epsilon = 1e-2;    // viscosity coefficient (0 = bare eikonal)
  double beta = 1e-2;       // Laplace scale of the indicator squashing

  void validate() const {
    if (lambda_p < 0 || lambda_n < 0 || lambda_v < 0 || lambda_c < 0)
      throw ConfigError("loss weights must be nonnegative");
    if (epsilon < 0) throw ConfigError("epsilon must be nonnegative");
    if (lambda_c > 0 && !(beta > 0)) throw ConfigError("beta must be positive");
  }
};

// Per-evaluation breakdown. Components are stored unweighted; `total` is the
// lambda-weighted sum.
struct LossReport {
  double total = 0.0;
  double data_point = 0.0;
  double data_normal = 0.0;
  double viscosity = 0.0;
  double coarea = 0.0;
  std::size_t points = 0;
  std::size_t nodes = 0;
  std::size_t voxels = 0;

  nlohmann::json to_json() const {
    return {{"total", total},       {"data_point", data_point}, {"data_normal", data_normal},
            {"viscosity", viscosity}, {"coarea", coarea},       {"points", points},
            {"nodes", nodes},       {"voxels", voxels}};
  }
};

/// Centered Laplace CDF with scale beta; squashes a signed distance into
/// (0,1) with value 1/2 on the zero level.
inline double psi_beta(double s, double beta) {
  if (!(beta > 0.0)) throw std::domain_error("psi_beta: beta must be positive");
  if (s <= 0.0) return 0.5 * std::exp(s / beta);
  return 1.0 - 0.5 * std::exp(-s / beta);
}

/// Laplace PDF with scale beta; the derivative of psi_beta away from 0.
inline double phi_beta(double s, double beta) {
  if (!(beta > 0.0)) throw std::domain_error("phi_beta: beta must be positive");
  return 0.5 / beta * std::exp(-std::abs(s) / beta);
}

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

namespace detail {

// Per-worker gradient buffers merged in worker order, so multithreaded
// accumulation reproduces the single-thread result up to summation rounding.
class WorkerBuffers {
 public:
  WorkerBuffers(GradBuffer* main, int threads) : main_(main) {
    if (main_ && threads > 1)
      for (int w = 0; w < threads; ++w)
        extra_.push_back(std::make_unique<GradBuffer>(main->size()));
  }
  GradBuffer* at(int worker) {
    if (!main_) return nullptr;
    if (extra_.empty()) return main_;
    return extra_[worker].get();
  }
  void merge() {
    for (auto& b : extra_) main_->merge(*b);
  }

 private:
  GradBuffer* main_;
  std::vector<std::unique_ptr<GradBuffer>> extra_;
};

inline double reduce(std::vector<double>& partial, double single, int threads) {
  if (threads <= 1) return single;
  double acc = 0.0;
  for (double v : partial) acc += v;
  return acc;
}

}  // namespace detail

/// Data terms at a batch of point indices: mean squared field value, and mean
/// squared gradient-minus-normal (0 when the cloud has no normals). Adjoints
/// enter buf scaled by lambda_p / lambda_n.
inline std::pair<double, double> data_loss(const ScalarGrid& grid, const PointCloud& pc,
                                           std::span<const std::uint32_t> point_ids,
                                           const LossConfig& cfg, GradBuffer* buf,
                                           int threads = 1) {
  if (point_ids.empty()) throw InputError("data_loss: empty point set");
  const double inv_m = 1.0 / static_cast<double>(point_ids.size());
  const bool with_normals = pc.has_normals();

  // Validate up front: worker threads must not throw.
  for (std::uint32_t id : point_ids) {
    const Vec3& q = pc.positions[id];
    if (!finite(q)) throw InputError("data_loss: non-finite point coordinate");
    if (q.x < 0 || q.x > 1 || q.y < 0 || q.y > 1 || q.z < 0 || q.z > 1)
      throw std::domain_error("data_loss: point outside the unit cube");
  }

  std::vector<double> pt_partial(threads > 1 ? threads : 0, 0.0);
  std::vector<double> nr_partial(threads > 1 ? threads : 0, 0.0);
  double pt_single = 0.0, nr_single = 0.0;
  detail::WorkerBuffers buffers(buf, threads);

  parallel_for(point_ids.size(), threads, [&](int w, std::size_t begin, std::size_t end) {
    double pt = 0.0, nr = 0.0;
    GradBuffer* b = buffers.at(w);
    for (std::size_t s = begin; s < end; ++s) {
      const Vec3& q = pc.positions[point_ids[s]];
      double v = grid.eval(q);
      pt += v * v;
      if (b && cfg.lambda_p > 0.0)
        grid.eval_adjoint(q, cfg.lambda_p * inv_m * 2.0 * v, *b);
      if (with_normals) {
        Vec3 g = grid.grad_at(q);
        Vec3 d = g - pc.normals[point_ids[s]];
        nr += norm2(d);
        if (b && cfg.lambda_n > 0.0)
          grid.grad_at_adjoint(q, cfg.lambda_n * inv_m * 2.0 * d, *b);
      }
    }
    if (threads > 1) {
      pt_partial[w] = pt;
      nr_partial[w] = nr;
    } else {
      pt_single = pt;
      nr_single = nr;
    }
  });
  buffers.merge();
  double point_term = detail::reduce(pt_partial, pt_single, threads) * inv_m;
  double normal_term = detail::reduce(nr_partial, nr_single, threads) * inv_m;
  return {point_term, normal_term};
}

/// Mean squared viscosity residual over interior nodes:
///   r = (|grad f| - 1) * sign(f) - epsilon * laplacian f
/// with symmetric finite differences, sign(0) = 0, and the norm's derivative
/// taken as 0 at a zero gradient. Adjoint enters buf scaled by lambda_v.
inline double viscosity_loss(const ScalarGrid& grid, std::span<const std::uint32_t> node_ids,
                             double epsilon, double lambda_v, GradBuffer* buf,
                             int threads = 1) {
  if (node_ids.empty()) throw InputError("viscosity_loss: empty node set");
  if (epsilon < 0) throw std::domain_error("viscosity_loss: epsilon must be nonnegative");
  for (std::uint32_t id : node_ids) {
    int i, j, k;
    grid.node_coords(id, i, j, k);
    if (!grid.node_interior(i, j, k))
      throw std::out_of_range("viscosity_loss: boundary node in batch");
  }
  const double inv_n = 1.0 / static_cast<double>(node_ids.size());

  std::vector<double> partial(threads > 1 ? threads : 0, 0.0);
  double single = 0.0;
  detail::WorkerBuffers buffers(buf, threads);

  parallel_for(node_ids.size(), threads, [&](int w, std::size_t begin, std::size_t end) {
    double acc = 0.0;
    GradBuffer* b = buffers.at(w);
    for (std::size_t s = begin; s < end; ++s) {
      int i, j, k;
      grid.node_coords(node_ids[s], i, j, k);
      Vec3 g = grid.node_grad(i, j, k);
      double lap = grid.node_laplacian(i, j, k);
      double gn = norm(g);
      double sgn = sign_of(grid.value(i, j, k));  // held constant in the adjoint
      double r = (gn - 1.0) * sgn - epsilon * lap;
      acc += r * r;
      if (b && lambda_v > 0.0) {
        double c = lambda_v * inv_n * 2.0 * r;
        if (gn > 0.0 && sgn != 0.0) grid.node_grad_adjoint(i, j, k, (c * sgn / gn) * g, *b);
        if (epsilon > 0.0) grid.node_laplacian_adjoint(i, j, k, -c * epsilon, *b);
      }
    }
    if (threads > 1) partial[w] = acc;
    else single = acc;
  });
  buffers.merge();
  return detail::reduce(partial, single, threads) * inv_n;
}

/// Surface-area proxy over a batch of voxels: mean of
///   phi_beta(-f(center)) * |grad f(center)|.
/// norm_count overrides the denominator (pass the full voxel count to read
/// the value as an area estimate). Adjoint enters buf scaled by lambda_c.
inline double coarea_loss(const ScalarGrid& grid, std::span<const std::uint32_t> voxel_ids,
                          double beta, double lambda_c, GradBuffer* buf,
                          std::size_t norm_count = 0, int threads = 1) {
  if (voxel_ids.empty()) throw InputError("coarea_loss: empty voxel set");
  if (!(beta > 0.0)) throw std::domain_error("coarea_loss: beta must be positive");
  for (std::uint32_t id : voxel_ids)
    if (id >= grid.voxel_count()) throw std::out_of_range("coarea_loss: voxel id out of range");
  const double inv_n = 1.0 / static_cast<double>(norm_count ? norm_count : voxel_ids.size());

  std::vector<double> partial(threads > 1 ? threads : 0, 0.0);
  double single = 0.0;
  detail::WorkerBuffers buffers(buf, threads);

  parallel_for(voxel_ids.size(), threads, [&](int w, std::size_t begin, std::size_t end) {
    double acc = 0.0;
    GradBuffer* b = buffers.at(w);
    for (std::size_t s = begin; s < end; ++s) {
      int i, j, k;
      grid.voxel_coords(voxel_ids[s], i, j, k);
      Vec3 c = grid.voxel_center(i, j, k);
      double fw = grid.eval(c);
      Vec3 g = grid.center_grad(i, j, k);
      double gn = norm(g);
      double phi = phi_beta(-fw, beta);
      acc += phi * gn;
      if (b && lambda_c > 0.0) {
        double scale = lambda_c * inv_n;
        // d/df phi(-f) = sign(-f)/beta * phi(-f); subgradient 0 on the level set
        double dphi = sign_of(-fw) / beta * phi;
        if (dphi != 0.0) grid.eval_adjoint(c, scale * dphi * gn, *b);
        if (gn > 0.0) grid.center_grad_adjoint(i, j, k, (scale * phi / gn) * g, *b);
      }
    }
    if (threads > 1) partial[w] = acc;
    else single = acc;
  });
  buffers.merge();
  return detail::reduce(partial, single, threads) * inv_n;
}

// One optimization step's worth of sampled work.
struct Batch {
  std::vector<std::uint32_t> voxels;  // active voxels for the coarea term
  std::vector<std::uint32_t> nodes;   // interior corner nodes for viscosity
  std::vector<std::uint32_t> points;  // data point indices
};

/// Evaluates every enabled component on the batch and accumulates the
/// lambda-weighted gradient. Deposits at inactive nodes are zeroed so frozen
/// nodes never move.
inline LossReport total_loss(const ScalarGrid& grid, const ActiveSet& active, const Batch& batch,
                             const PointCloud& pc, const LossConfig& cfg, GradBuffer& buf,
                             int threads = 1) {
  LossReport rep;
  buf.clear();
  if (!batch.points.empty()) {
    auto [pt, nr] = data_loss(grid, pc, batch.points, cfg, &buf, threads);
    rep.data_point = pt;
    rep.data_normal = nr;
    rep.points = batch.points.size();
  }
  if (!batch.nodes.empty()) {
    rep.viscosity = viscosity_loss(grid, batch.nodes, cfg.epsilon, cfg.lambda_v, &buf, threads);
    rep.nodes = batch.nodes.size();
  }
  if (!batch.voxels.empty() && cfg.beta > 0.0) {
    rep.coarea = coarea_loss(grid, batch.voxels, cfg.beta, cfg.lambda_c, &buf, 0, threads);
    rep.voxels = batch.voxels.size();
  }
  rep.total = cfg.lambda_p * rep.data_point + cfg.lambda_n * rep.data_normal +
              cfg.lambda_v * rep.viscosity + cfg.lambda_c * rep.coarea;
  for (std::uint32_t id : buf.touched())
    if (!active.node_mask[id]) buf.set_zero(id);
  return rep;
}

}  // namespace gridfit
