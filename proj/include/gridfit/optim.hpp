#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "json.hpp"

#include "gridfit/errors.hpp"
#include "gridfit/grid.hpp"
#include "gridfit/losses.hpp"

namespace gridfit {

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
};

// First/second moment accumulators aligned 1:1 with an active-node list.
struct AdamState {
  AdamParams params;
  std::vector<double> m, v;
  std::int64_t step = 0;

  explicit AdamState(std::size_t n_active, AdamParams p = {})
      : params(p), m(n_active, 0.0), v(n_active, 0.0) {}
};

/// One Adam update over the active nodes; frozen nodes are untouched. The
/// gradient buffer must already be zero at inactive nodes.
inline void adam_step(AdamState& state, const GradBuffer& grads, ScalarGrid& grid,
                      const ActiveSet& active) {
  if (state.m.size() != active.nodes.size())
    throw std::invalid_argument("adam_step: state size does not match active set");
  state.step += 1;
  const double c1 = 1.0 - std::pow(state.params.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.params.beta2, static_cast<double>(state.step));
  auto& values = grid.values();
  for (std::size_t s = 0; s < active.nodes.size(); ++s) {
    double g = grads.get(active.nodes[s]);
    double m = state.m[s] = state.params.beta1 * state.m[s] + (1.0 - state.params.beta1) * g;
    double v = state.v[s] = state.params.beta2 * state.v[s] + (1.0 - state.params.beta2) * g * g;
    values[active.nodes[s]] -= state.params.lr * (m / c1) / (std::sqrt(v / c2) + state.params.eps_hat);
  }
}

// One coarse-to-fine stage.
struct Stage {
  int res = 64;
  int epochs = 5;
  double prune_threshold = 0.9;
  int iterations_per_epoch = 12800;
  double voxel_batch_fraction = 0.1;
  std::size_t point_batch_size = 5000;
};

struct Schedule {
  std::vector<Stage> stages;
  std::uint64_t seed = 0;

  void validate() const {
    if (stages.empty()) throw ConfigError("schedule has no stages");
    for (std::size_t s = 0; s < stages.size(); ++s) {
      const Stage& st = stages[s];
      if (st.res < 2) throw ConfigError("stage resolution must be >= 2");
      if (st.epochs < 0) throw ConfigError("stage epochs must be nonnegative");
      if (st.iterations_per_epoch < 0) throw ConfigError("iterations per epoch must be nonnegative");
      if (!(st.prune_threshold > 0)) throw ConfigError("prune threshold must be positive");
      if (!(st.voxel_batch_fraction > 0 && st.voxel_batch_fraction <= 1))
        throw ConfigError("voxel batch fraction must be in (0, 1]");
      if (st.point_batch_size < 1) throw ConfigError("point batch size must be >= 1");
      if (s > 0 && stages[s].res != 2 * stages[s - 1].res)
        throw ConfigError("stage resolutions must double");
    }
  }
};

/// Initial field: the SDF of a sphere centered at the centroid of the data
/// with radius equal to the mean point distance from it.
inline ScalarGrid init_grid(const PointCloud& pc, int res) {
  if (pc.positions.empty()) throw InputError("init_grid: empty point cloud");
  Vec3 c{0, 0, 0};
  for (const Vec3& q : pc.positions) c += q;
  c *= 1.0 / static_cast<double>(pc.size());
  double r = 0.0;
  for (const Vec3& q : pc.positions) r += norm(q - c);
  r /= static_cast<double>(pc.size());

  ScalarGrid grid(res);
  int n = grid.nodes_per_axis();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        grid.value(i, j, k) = norm(grid.node_pos(i, j, k) - c) - r;
  return grid;
}

struct IterationRecord {
  int stage = 0;
  int iter = 0;
  LossReport report;
  std::size_t active_voxels = 0;

  nlohmann::json to_json() const {
    nlohmann::json j = report.to_json();
    j["stage"] = stage;
    j["iter"] = iter;
    j["active_voxels"] = active_voxels;
    return j;
  }
};

using LogSink = std::function<void(const IterationRecord&)>;

namespace detail {

// Draws k distinct entries from perm without resetting it between calls;
// any permutation state yields a uniform without-replacement sample.
inline void sample_prefix(std::vector<std::uint32_t>& perm, std::size_t k, std::mt19937_64& rng) {
  std::size_t n = perm.size();
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(perm[i], perm[pick(rng)]);
  }
}

}  // namespace detail

/// Runs epochs * iterations_per_epoch optimization steps on one grid level.
/// Each iteration samples ceil(fraction * |active voxels|) voxels without
/// replacement (viscosity at their interior corner nodes, coarea at their
/// centers) and min(m, point_batch_size) data points.
inline void train_stage(ScalarGrid& grid, const ActiveSet& active, const PointCloud& pc,
                        const LossConfig& cfg, const Stage& stage, int stage_index,
                        std::mt19937_64& rng, const LogSink& sink = {}, int threads = 1) {
  if (grid.res() != stage.res)
    throw ScheduleError("train_stage: grid resolution " + std::to_string(grid.res()) +
                        " does not match stage resolution " + std::to_string(stage.res));
  if (active.empty())
    throw ScheduleError("train_stage: active set is empty (everything pruned)");
  if (pc.positions.empty()) throw InputError("train_stage: empty point cloud");

  const std::size_t voxel_batch = std::min<std::size_t>(
      active.voxels.size(),
      static_cast<std::size_t>(
          std::ceil(stage.voxel_batch_fraction * static_cast<double>(active.voxels.size()))));
  const std::size_t point_batch = std::min(pc.size(), stage.point_batch_size);

  std::vector<std::uint32_t> voxel_perm = active.voxels;
  std::vector<std::uint32_t> point_perm(pc.size());
  for (std::size_t i = 0; i < point_perm.size(); ++i)
    point_perm[i] = static_cast<std::uint32_t>(i);

  AdamState adam(active.nodes.size());
  GradBuffer buf(grid.node_count());
  Batch batch;
  const int total_iters = stage.epochs * stage.iterations_per_epoch;

  for (int iter = 0; iter < total_iters; ++iter) {
    detail::sample_prefix(voxel_perm, voxel_batch, rng);
    batch.voxels.assign(voxel_perm.begin(), voxel_perm.begin() + voxel_batch);
    std::sort(batch.voxels.begin(), batch.voxels.end());

    batch.nodes.clear();
    for (std::uint32_t vid : batch.voxels) {
      int i, j, k;
      grid.voxel_coords(vid, i, j, k);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          for (int d = 0; d < 2; ++d)
            if (grid.node_interior(i + a, j + b, k + d))
              batch.nodes.push_back(grid.node_id(i + a, j + b, k + d));
    }
    std::sort(batch.nodes.begin(), batch.nodes.end());
    batch.nodes.erase(std::unique(batch.nodes.begin(), batch.nodes.end()), batch.nodes.end());

    detail::sample_prefix(point_perm, point_batch, rng);
    batch.points.assign(point_perm.begin(), point_perm.begin() + point_batch);
    std::sort(batch.points.begin(), batch.points.end());

    LossReport rep = total_loss(grid, active, batch, pc, cfg, buf, threads);
    adam_step(adam, buf, grid, active);

    if (sink) {
      IterationRecord rec;
      rec.stage = stage_index;
      rec.iter = iter;
      rec.report = rep;
      rec.active_voxels = active.voxels.size();
      sink(rec);
    }
  }
}

/// Full coarse-to-fine reconstruction: initialize at the coarsest level, then
/// per stage prune and train, upsampling between stages.
inline ScalarGrid reconstruct(const PointCloud& pc, const LossConfig& cfg,
                              const Schedule& schedule, const LogSink& sink = {},
                              int threads = 1) {
  if (pc.positions.empty()) throw InputError("reconstruct: empty point cloud");
  cfg.validate();
  schedule.validate();

  std::mt19937_64 rng(schedule.seed);
  ScalarGrid grid = init_grid(pc, schedule.stages.front().res);
  for (std::size_t s = 0; s < schedule.stages.size(); ++s) {
    const Stage& stage = schedule.stages[s];
    if (s > 0) grid = grid.upsample();
    ActiveSet active = grid.prune(stage.prune_threshold);
    if (active.empty())
      throw ScheduleError("reconstruct: no active voxels at resolution " +
                          std::to_string(stage.res) + " with threshold " +
                          std::to_string(stage.prune_threshold));
    train_stage(grid, active, pc, cfg, stage, static_cast<int>(s), rng, sink, threads);
  }
  return grid;
}

}  // namespace gridfit
