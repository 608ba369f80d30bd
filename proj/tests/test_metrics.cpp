#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "gridfit/metrics.hpp"
#include "support.hpp"

using namespace gridfit;

namespace {

std::vector<Vec3> random_points(std::size_t n, std::mt19937_64& rng) {
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(testsup::random_point(rng, 0.0, 1.0));
  return pts;
}

// O(n*m) reference used to pin the spatial index.
std::pair<std::uint32_t, double> brute_nearest(const Vec3& q, const std::vector<Vec3>& pts) {
  std::uint32_t best = 0;
  double best_d2 = dist2(q, pts[0]);
  for (std::uint32_t i = 1; i < pts.size(); ++i) {
    double d2 = dist2(q, pts[i]);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return {best, best_d2};
}

}  // namespace

TEST_CASE("kd-tree equals brute force exactly on 50 random instances") {
  std::mt19937_64 rng(3);
  for (int inst = 0; inst < 50; ++inst) {
    std::size_t n = 1 + rng() % 600;
    std::vector<Vec3> pts = random_points(n, rng);
    KdTree tree(pts);
    for (int q = 0; q < 40; ++q) {
      Vec3 query = testsup::random_point(rng, -0.2, 1.2);
      auto [bi, bd] = brute_nearest(query, pts);
      auto [ti, td] = tree.nearest(query);
      CHECK(td == bd);  // exact: same arithmetic
    }
  }
}

TEST_CASE("chamfer/hausdorff: trivial values and brute-force agreement") {
  std::vector<Vec3> a{{0, 0, 0}};
  std::vector<Vec3> b{{1, 0, 0}};
  PairwiseDistances d = chamfer_hausdorff(a, b);
  CHECK(d.chamfer == 1.0);
  CHECK(d.hausdorff == 1.0);
  CHECK(d.chamfer_one == 1.0);
  CHECK(d.hausdorff_one == 1.0);

  std::mt19937_64 rng(5);
  std::vector<Vec3> big = random_points(500, rng);
  PairwiseDistances zero = chamfer_hausdorff(big, big);
  CHECK(zero.chamfer == 0.0);
  CHECK(zero.hausdorff == 0.0);

  std::vector<Vec3> c = random_points(600, rng);
  PairwiseDistances got = chamfer_hausdorff(big, c);
  double sum_ab = 0.0, max_ab = 0.0, sum_ba = 0.0, max_ba = 0.0;
  for (const Vec3& p : big) {
    double dd = std::sqrt(brute_nearest(p, c).second);
    sum_ab += dd;
    max_ab = std::max(max_ab, dd);
  }
  for (const Vec3& p : c) {
    double dd = std::sqrt(brute_nearest(p, big).second);
    sum_ba += dd;
    max_ba = std::max(max_ba, dd);
  }
  CHECK(got.chamfer_one == sum_ab / big.size());
  CHECK(got.hausdorff_one == max_ab);
  CHECK(got.chamfer == 0.5 * (sum_ab / big.size() + sum_ba / c.size()));
  CHECK(got.hausdorff == std::max(max_ab, max_ba));

  // symmetry and ordering invariants
  PairwiseDistances rev = chamfer_hausdorff(c, big);
  CHECK(rev.chamfer == got.chamfer);
  CHECK(rev.hausdorff == got.hausdorff);
  CHECK(got.chamfer <= got.hausdorff);
  CHECK(got.chamfer_one <= got.hausdorff_one);
  CHECK(got.hausdorff_one <= got.hausdorff);

  CHECK_THROWS_AS(chamfer_hausdorff({}, big), InputError);
}

TEST_CASE("adding a target point to the source never raises the one-sided chamfer") {
  std::mt19937_64 rng(7);
  std::vector<Vec3> a = random_points(100, rng);
  std::vector<Vec3> b = random_points(120, rng);
  double before = chamfer_hausdorff(a, b).chamfer_one;
  std::vector<Vec3> a2 = a;
  a2.push_back(b[0]);
  double after = chamfer_hausdorff(a2, b).chamfer_one;
  CHECK(after <= before);
}

TEST_CASE("f-score: saturation, vanishing, and the half-overlap fixture") {
  std::mt19937_64 rng(9);
  std::vector<Vec3> pts = random_points(200, rng);
  CHECK(f_score(pts, pts, 0.01) == 100.0);

  std::vector<Vec3> far;
  for (const Vec3& p : pts) far.push_back(p + Vec3{10.0, 0.0, 0.0});
  CHECK(f_score(pts, far, 0.01) == 0.0);

  // recon matches half of gt exactly; the other half of gt is out of reach
  std::vector<Vec3> recon, gt;
  for (int i = 0; i < 100; ++i) {
    Vec3 p{0.001 * i, 0.0, 0.0};
    recon.push_back(p);
    gt.push_back(p);
    gt.push_back(p + Vec3{0.0, 5.0 + i, 0.0});
  }
  CHECK(f_score(recon, gt, 0.01) == Catch::Approx(200.0 / 3.0).margin(0.01));

  CHECK_THROWS_AS(f_score(pts, pts, 0.0), InputError);
  CHECK_THROWS_AS(f_score({}, pts, 0.01), InputError);
}

TEST_CASE("normal consistency: aligned, orthogonal, and oracle-checked") {
  std::mt19937_64 rng(11);
  OrientedPoints a;
  a.positions = random_points(150, rng);
  for (std::size_t i = 0; i < a.positions.size(); ++i) a.normals.push_back(testsup::random_unit(rng));
  CHECK(normal_consistency(a, a) == 100.0);

  OrientedPoints rot = a;
  for (Vec3& n : rot.normals) n = {-n.y, n.x, 0.0};  // 90-degree turn of the xy part
  OrientedPoints planar = a;
  for (std::size_t i = 0; i < planar.normals.size(); ++i) {
    Vec3 n = planar.normals[i];
    n.z = 0.0;
    planar.normals[i] = normalized(n);
    rot.normals[i] = {-planar.normals[i].y, planar.normals[i].x, 0.0};
  }
  CHECK(normal_consistency(planar, rot) == Catch::Approx(0.0).margin(1e-12));

  OrientedPoints b;
  b.positions = random_points(130, rng);
  for (std::size_t i = 0; i < b.positions.size(); ++i) b.normals.push_back(testsup::random_unit(rng));
  double got = normal_consistency(a, b);
  double acc_a = 0.0, acc_b = 0.0;
  for (std::size_t i = 0; i < a.positions.size(); ++i)
    acc_a += std::abs(dot(a.normals[i], b.normals[brute_nearest(a.positions[i], b.positions).first]));
  for (std::size_t i = 0; i < b.positions.size(); ++i)
    acc_b += std::abs(dot(b.normals[i], a.normals[brute_nearest(b.positions[i], a.positions).first]));
  double oracle = 100.0 * 0.5 * (acc_a / a.positions.size() + acc_b / b.positions.size());
  CHECK(got == oracle);

  OrientedPoints no_normals;
  no_normals.positions = a.positions;
  CHECK_THROWS_AS(normal_consistency(a, no_normals), InputError);
}

TEST_CASE("sample_mesh: barycentric validity, area weighting, symmetry") {
  TriMesh single;
  single.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  single.triangles = {{0, 1, 2}};
  std::mt19937_64 rng(13);
  OrientedPoints s = sample_mesh(single, 500, rng);
  for (const Vec3& p : s.positions) {
    CHECK(p.x >= -1e-12);
    CHECK(p.y >= -1e-12);
    CHECK(p.x + p.y <= 1.0 + 1e-12);
    CHECK(std::abs(p.z) < 1e-15);
  }
  for (const Vec3& n : s.normals) CHECK(n.z == Catch::Approx(1.0));

  // two triangles, 9:1 area ratio
  TriMesh two;
  two.vertices = {{0, 0, 0}, {3, 0, 0}, {0, 3, 0},   // area 4.5
                  {10, 0, 0}, {11, 0, 0}, {10, 1, 0}};  // area 0.5
  two.triangles = {{0, 1, 2}, {3, 4, 5}};
  OrientedPoints t = sample_mesh(two, 10000, rng);
  std::size_t in_big = 0;
  for (const Vec3& p : t.positions)
    if (p.x < 5.0) ++in_big;
  double sigma = std::sqrt(10000 * 0.9 * 0.1);
  CHECK(std::abs(static_cast<double>(in_big) - 9000.0) <= 3.0 * sigma);

  CHECK_THROWS_AS(sample_mesh(TriMesh{}, 10, rng), InputError);
}

TEST_CASE("sphere mesh samples center on the sphere center") {
  ScalarGrid sph = testsup::grid_from(32, [](double x, double y, double z) {
    return testsup::sphere_sdf(x, y, z);
  });
  TriMesh mesh = marching_cubes(sph);
  std::mt19937_64 rng(17);
  OrientedPoints s = sample_mesh(mesh, 10000, rng);
  Vec3 centroid{0, 0, 0};
  for (const Vec3& p : s.positions) centroid += p;
  centroid *= 1.0 / s.positions.size();
  CHECK(norm(centroid - Vec3{0.5, 0.5, 0.5}) < 0.01);
}

TEST_CASE("metric report serialization carries both unit systems") {
  MetricReport rep;
  rep.d_c = 2.0;
  rep.d_h = 5.0;
  rep.scale = 0.4;
  rep.f_score = 88.0;
  rep.ncs = 94.0;
  auto j = rep.to_json();
  CHECK(j["d_c"]["original"] == 2.0);
  CHECK(j["d_c"]["normalized"] == Catch::Approx(0.8));
  CHECK(j["f_score"] == 88.0);
  std::string header = MetricReport::csv_header();
  std::string row = rep.csv_row();
  CHECK(std::count(header.begin(), header.end(), ',') ==
        std::count(row.begin(), row.end(), ','));
}
