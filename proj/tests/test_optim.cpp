#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "gridfit/optim.hpp"
#include "support.hpp"

using namespace gridfit;
using testsup::grid_from;
using testsup::random_grid;

TEST_CASE("adam: zero gradient leaves everything untouched") {
  ScalarGrid g(4, 1.0);
  ActiveSet active = g.prune(2.0);
  AdamState state(active.nodes.size());
  GradBuffer buf(g.node_count());
  buf.clear();
  std::vector<double> before = g.values();
  adam_step(state, buf, g, active);
  CHECK(g.values() == before);
  for (double m : state.m) CHECK(m == 0.0);
  for (double v : state.v) CHECK(v == 0.0);
}

TEST_CASE("adam: bias-corrected first step") {
  ScalarGrid g(2, 0.0);
  ActiveSet active = g.prune(1.0);
  AdamState state(active.nodes.size());
  GradBuffer buf(g.node_count());
  buf.clear();
  double grad = 0.37;
  for (std::uint32_t id : active.nodes) buf.add(id, grad);
  adam_step(state, buf, g, active);
  double expected = -state.params.lr * grad / (std::abs(grad) + state.params.eps_hat);
  for (std::uint32_t id : active.nodes)
    CHECK(g.values()[id] == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adam matches a textbook oracle over 50 random steps") {
  ScalarGrid g(1, 0.0);  // 8 nodes = 8 parameters
  ActiveSet active = g.prune(1.0);
  REQUIRE(active.nodes.size() == 8);
  AdamState state(8);
  GradBuffer buf(g.node_count());

  std::vector<double> x(8, 0.0), m(8, 0.0), v(8, 0.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const double lr = state.params.lr, b1 = state.params.beta1, b2 = state.params.beta2,
               eps = state.params.eps_hat;
  for (int t = 1; t <= 50; ++t) {
    std::vector<double> grad(8);
    for (double& gv : grad) gv = uni(rng);
    buf.clear();
    for (std::size_t s = 0; s < 8; ++s) buf.add(active.nodes[s], grad[s]);
    adam_step(state, buf, g, active);

    for (std::size_t s = 0; s < 8; ++s) {
      m[s] = b1 * m[s] + (1 - b1) * grad[s];
      v[s] = b2 * v[s] + (1 - b2) * grad[s] * grad[s];
      double mhat = m[s] / (1 - std::pow(b1, t));
      double vhat = v[s] / (1 - std::pow(b2, t));
      x[s] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    for (std::size_t s = 0; s < 8; ++s)
      CHECK(g.values()[active.nodes[s]] == Catch::Approx(x[s]).epsilon(1e-12).margin(1e-15));
  }
}

TEST_CASE("adam rejects a mismatched active set") {
  ScalarGrid g(2, 0.0);
  ActiveSet active = g.prune(1.0);
  AdamState state(active.nodes.size() + 1);
  GradBuffer buf(g.node_count());
  buf.clear();
  CHECK_THROWS_AS(adam_step(state, buf, g, active), std::invalid_argument);
}

TEST_CASE("init_grid builds the centroid sphere") {
  std::mt19937_64 rng(5);
  PointCloud sphere = testsup::sphere_cloud(10000, 0.3, {0.5, 0.5, 0.5}, rng);
  ScalarGrid g = init_grid(sphere, 16);
  CHECK(g.value(8, 8, 8) == Catch::Approx(-0.3).margin(1e-2));
  // nodes near the radius are near zero
  for (int i = 0; i <= 16; ++i) {
    Vec3 p = g.node_pos(i, 8, 8);
    if (std::abs(norm(p - Vec3{0.5, 0.5, 0.5}) - 0.3) < 1e-9)
      CHECK(std::abs(g.value(i, 8, 8)) < g.h());
  }

  PointCloud single;
  single.positions.push_back({0.5, 0.5, 0.5});
  ScalarGrid d = init_grid(single, 8);
  for (int i = 0; i <= 8; ++i)
    for (int j = 0; j <= 8; ++j)
      CHECK(d.value(i, j, 4) ==
            Catch::Approx(norm(d.node_pos(i, j, 4) - Vec3{0.5, 0.5, 0.5})).margin(1e-12));

  PointCloud empty;
  CHECK_THROWS_AS(init_grid(empty, 8), InputError);
}

TEST_CASE("train_stage: zero iterations is a no-op; fixed seed is bitwise reproducible") {
  std::mt19937_64 data_rng(7);
  PointCloud pc = testsup::sphere_cloud(2000, 0.3, {0.5, 0.5, 0.5}, data_rng);
  LossConfig cfg;

  ScalarGrid g0 = init_grid(pc, 16);
  ActiveSet active = g0.prune(0.9);
  Stage stage{16, 0, 0.9, 100, 0.1, 1000};

  ScalarGrid g = g0;
  std::mt19937_64 rng(1);
  train_stage(g, active, pc, cfg, stage, 0, rng);
  CHECK(g.values() == g0.values());

  stage.epochs = 1;
  stage.iterations_per_epoch = 25;
  ScalarGrid a = g0, b = g0;
  std::mt19937_64 ra(42), rb(42);
  train_stage(a, active, pc, cfg, stage, 0, ra);
  train_stage(b, active, pc, cfg, stage, 0, rb);
  CHECK(a.values() == b.values());

  // a different seed takes a different trajectory
  ScalarGrid c = g0;
  std::mt19937_64 rc(43);
  train_stage(c, active, pc, cfg, stage, 0, rc);
  CHECK(a.values() != c.values());
}

TEST_CASE("train_stage freezes inactive nodes bit-exactly") {
  std::mt19937_64 data_rng(11);
  PointCloud pc = testsup::sphere_cloud(2000, 0.3, {0.5, 0.5, 0.5}, data_rng);
  ScalarGrid g = init_grid(pc, 16);
  ActiveSet active = g.prune(0.05);  // tight shell only
  REQUIRE(!active.empty());
  REQUIRE(active.nodes.size() < g.node_count());
  std::vector<double> before = g.values();

  Stage stage{16, 1, 0.05, 50, 0.2, 1000};
  std::mt19937_64 rng(9);
  LossConfig cfg;
  train_stage(g, active, pc, cfg, stage, 0, rng);

  bool some_active_moved = false;
  for (std::uint32_t id = 0; id < g.node_count(); ++id) {
    if (active.node_mask[id]) {
      some_active_moved = some_active_moved || g.values()[id] != before[id];
    } else {
      CHECK(g.values()[id] == before[id]);
    }
  }
  CHECK(some_active_moved);
}

TEST_CASE("train_stage errors: resolution mismatch and empty active set") {
  std::mt19937_64 rng(13);
  PointCloud pc = testsup::sphere_cloud(100, 0.3, {0.5, 0.5, 0.5}, rng);
  ScalarGrid g = init_grid(pc, 8);
  ActiveSet active = g.prune(0.9);
  Stage stage{16, 1, 0.9, 10, 0.1, 100};
  std::mt19937_64 r(1);
  CHECK_THROWS_AS(train_stage(g, active, pc, LossConfig{}, stage, 0, r), ScheduleError);

  ActiveSet hollow;
  hollow.res = 8;
  hollow.node_mask.assign(g.node_count(), 0);
  hollow.voxel_mask.assign(g.voxel_count(), 0);
  Stage ok{8, 1, 0.9, 10, 0.1, 100};
  CHECK_THROWS_AS(train_stage(g, hollow, pc, LossConfig{}, ok, 0, r), ScheduleError);
}

TEST_CASE("median per-epoch loss is non-increasing on the sphere fixture") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    std::mt19937_64 data_rng(100 + seed);
    PointCloud pc = testsup::sphere_cloud(3000, 0.3, {0.5, 0.5, 0.5}, data_rng);
    ScalarGrid g = init_grid(pc, 16);
    ActiveSet active = g.prune(0.9);
    Stage stage{16, 3, 0.9, 60, 0.1, 1500};
    std::vector<std::vector<double>> per_epoch(3);
    LogSink sink = [&](const IterationRecord& rec) {
      per_epoch[rec.iter / stage.iterations_per_epoch].push_back(rec.report.total);
    };
    std::mt19937_64 rng(seed);
    train_stage(g, active, pc, LossConfig{}, stage, 0, rng, sink);
    auto median = [](std::vector<double> v) {
      std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
      return v[v.size() / 2];
    };
    double m0 = median(per_epoch[0]), m1 = median(per_epoch[1]), m2 = median(per_epoch[2]);
    CHECK(m1 <= m0 * (1.0 + 1e-9));
    CHECK(m2 <= m1 * (1.0 + 1e-9));
  }
}

TEST_CASE("reconstruct: errors early on an empty cloud, runs the full pipeline") {
  PointCloud empty;
  Schedule schedule;
  schedule.stages = {{16, 1, 0.9, 20, 0.1, 500}};
  CHECK_THROWS_AS(reconstruct(empty, LossConfig{}, schedule), InputError);

  std::mt19937_64 rng(17);
  PointCloud pc = testsup::sphere_cloud(3000, 0.3, {0.5, 0.5, 0.5}, rng);
  schedule.stages = {{16, 1, 0.9, 40, 0.1, 1500}, {32, 1, 0.4, 40, 0.1, 1500}};
  schedule.seed = 7;
  std::vector<double> totals;
  LogSink sink = [&](const IterationRecord& rec) { totals.push_back(rec.report.total); };
  ScalarGrid out = reconstruct(pc, LossConfig{}, schedule, sink);
  CHECK(out.res() == 32);
  REQUIRE(totals.size() == 80);
  CHECK(totals.back() < totals.front());
  for (double v : out.values()) CHECK(std::isfinite(v));
}

TEST_CASE("pruning keeps every voxel the analytic sphere passes through") {
  std::mt19937_64 rng(19);
  PointCloud pc = testsup::sphere_cloud(3000, 0.3, {0.5, 0.5, 0.5}, rng);
  ScalarGrid g = init_grid(pc, 16);
  ActiveSet active = g.prune(0.9);
  Stage stage{16, 1, 0.9, 60, 0.1, 1500};
  std::mt19937_64 trng(3);
  train_stage(g, active, pc, LossConfig{}, stage, 0, trng);

  ScalarGrid fine = g.upsample();
  ActiveSet next = fine.prune(0.4);
  for (int i = 0; i < fine.res(); ++i)
    for (int j = 0; j < fine.res(); ++j)
      for (int k = 0; k < fine.res(); ++k) {
        double lo = 1e30, hi = -1e30;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int d = 0; d < 2; ++d) {
              Vec3 p = fine.node_pos(i + a, j + b, k + d);
              double sdf = testsup::sphere_sdf(p.x, p.y, p.z);
              lo = std::min(lo, sdf);
              hi = std::max(hi, sdf);
            }
        if (lo <= 0.0 && hi >= 0.0)  // analytic zero level intersects this voxel
          CHECK(static_cast<bool>(next.voxel_mask[fine.voxel_id(i, j, k)]));
      }
}

TEST_CASE("schedule validation") {
  Schedule s;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.stages = {{16, 1, 0.9, 10, 0.1, 100}, {48, 1, 0.9, 10, 0.1, 100}};
  CHECK_THROWS_AS(s.validate(), ConfigError);  // not doubling
  s.stages = {{16, 1, 0.9, 10, 0.1, 100}, {32, 1, 0.0, 10, 0.1, 100}};
  CHECK_THROWS_AS(s.validate(), ConfigError);  // bad threshold
  s.stages = {{16, 1, 0.9, 10, 1.5, 100}};
  CHECK_THROWS_AS(s.validate(), ConfigError);  // bad fraction
  s.stages = {{16, 2, 0.9, 10, 0.1, 100}, {32, 1, 0.4, 10, 0.1, 100}};
  s.validate();
}
