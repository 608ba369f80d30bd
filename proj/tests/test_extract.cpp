#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gridfit/extract.hpp"
#include "support.hpp"

using namespace gridfit;
using testsup::grid_from;

TEST_CASE("constant grids produce an empty mesh") {
  ScalarGrid pos(8, 1.0);
  CHECK(marching_cubes(pos).empty());
  ScalarGrid neg(8, -1.0);
  CHECK(marching_cubes(neg).empty());
}

TEST_CASE("plane extraction: flat, unit area, oriented along the gradient") {
  ScalarGrid plane = grid_from(32, [](double x, double, double) { return x - 0.5; });
  TriMesh mesh = marching_cubes(plane);
  REQUIRE(!mesh.empty());
  for (const Vec3& v : mesh.vertices) CHECK(std::abs(v.x - 0.5) < 1e-12);
  CHECK(mesh_area(mesh) == Catch::Approx(1.0).margin(1e-6));
  // winding: right-hand normals point toward increasing f (+x here)
  for (const auto& t : mesh.triangles) {
    Vec3 n = cross(mesh.vertices[t[1]] - mesh.vertices[t[0]],
                   mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    CHECK(n.x > 0.0);
  }
}

TEST_CASE("sphere extraction: radius, area, watertightness, components") {
  ScalarGrid sph = grid_from(64, [](double x, double y, double z) {
    return testsup::sphere_sdf(x, y, z);
  });
  TriMesh mesh = marching_cubes(sph);
  REQUIRE(!mesh.empty());
  double h = sph.h();
  for (const Vec3& v : mesh.vertices)
    CHECK(std::abs(norm(v - Vec3{0.5, 0.5, 0.5}) - 0.3) < h);
  CHECK(mesh_area(mesh) == Catch::Approx(4.0 * M_PI * 0.09).epsilon(0.03));
  CHECK(is_watertight(mesh));
  CHECK(connected_components(mesh) == 1);

  // face normals point outward (field increases outward)
  for (const auto& t : mesh.triangles) {
    Vec3 centroid = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
    Vec3 n = cross(mesh.vertices[t[1]] - mesh.vertices[t[0]],
                   mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    CHECK(dot(n, centroid - Vec3{0.5, 0.5, 0.5}) > 0.0);
  }
  // vertex normals agree with the winding
  REQUIRE(mesh.has_normals());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    CHECK(dot(mesh.normals[i], mesh.vertices[i] - Vec3{0.5, 0.5, 0.5}) > 0.0);
}

TEST_CASE("sign flip: same vertices, reversed orientation") {
  ScalarGrid sph = grid_from(16, [](double x, double y, double z) {
    return testsup::sphere_sdf(x, y, z, 0.27);
  });
  ScalarGrid neg = sph;
  for (double& v : neg.values()) v = -v;
  TriMesh a = marching_cubes(sph), b = marching_cubes(neg);
  REQUIRE(a.vertices.size() == b.vertices.size());
  auto key = [](const Vec3& v) { return std::make_tuple(v.x, v.y, v.z); };
  std::vector<std::tuple<double, double, double>> av, bv;
  for (const Vec3& v : a.vertices) av.push_back(key(v));
  for (const Vec3& v : b.vertices) bv.push_back(key(v));
  std::sort(av.begin(), av.end());
  std::sort(bv.begin(), bv.end());
  for (std::size_t i = 0; i < av.size(); ++i) {
    CHECK(std::abs(std::get<0>(av[i]) - std::get<0>(bv[i])) < 1e-12);
    CHECK(std::abs(std::get<1>(av[i]) - std::get<1>(bv[i])) < 1e-12);
    CHECK(std::abs(std::get<2>(av[i]) - std::get<2>(bv[i])) < 1e-12);
  }
  double flux_a = 0.0, flux_b = 0.0;
  auto flux = [](const TriMesh& m) {
    double acc = 0.0;
    for (const auto& t : m.triangles) {
      Vec3 c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.0;
      Vec3 n = cross(m.vertices[t[1]] - m.vertices[t[0]], m.vertices[t[2]] - m.vertices[t[0]]);
      acc += dot(n, c - Vec3{0.5, 0.5, 0.5});
    }
    return acc;
  };
  flux_a = flux(a);
  flux_b = flux(b);
  CHECK(flux_a > 0.0);
  CHECK(flux_b < 0.0);
}

TEST_CASE("restriction to the full active set changes nothing") {
  ScalarGrid sph = grid_from(24, [](double x, double y, double z) {
    return testsup::sphere_sdf(x, y, z);
  });
  ActiveSet full = sph.prune(1e9);
  REQUIRE(full.voxels.size() == sph.voxel_count());
  TriMesh unrestricted = marching_cubes(sph);
  TriMesh restricted = marching_cubes(sph, 0.0, &full);
  REQUIRE(unrestricted.vertices.size() == restricted.vertices.size());
  REQUIRE(unrestricted.triangles.size() == restricted.triangles.size());
  for (std::size_t i = 0; i < unrestricted.vertices.size(); ++i) {
    CHECK(unrestricted.vertices[i].x == restricted.vertices[i].x);
    CHECK(unrestricted.vertices[i].y == restricted.vertices[i].y);
    CHECK(unrestricted.vertices[i].z == restricted.vertices[i].z);
  }
  CHECK(unrestricted.triangles == restricted.triangles);

  // a pruned set that still covers the zero level gives the same surface
  ActiveSet shell = sph.prune(0.4);
  TriMesh from_shell = marching_cubes(sph, 0.0, &shell);
  CHECK(from_shell.triangles.size() == unrestricted.triangles.size());
  CHECK(mesh_area(from_shell) == Catch::Approx(mesh_area(unrestricted)).epsilon(1e-12));
}

TEST_CASE("obj writing: exact v/f layout") {
  TriMesh tri;
  tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  tri.triangles = {{0, 1, 2}};
  write_mesh(tri, "unit_tri.obj", MeshFormat::obj);
  std::ifstream in("unit_tri.obj");
  std::string line;
  int v_lines = 0, f_lines = 0;
  std::string f_content;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) == 0) ++v_lines;
    if (line.rfind("f ", 0) == 0) {
      ++f_lines;
      f_content = line;
    }
  }
  CHECK(v_lines == 3);
  CHECK(f_lines == 1);
  CHECK(f_content == "f 1 2 3");
  std::remove("unit_tri.obj");

  TriMesh empty;
  write_mesh(empty, "empty.obj", MeshFormat::obj);
  TriMesh back = read_mesh("empty.obj");
  CHECK(back.vertices.empty());
  CHECK(back.triangles.empty());
  std::remove("empty.obj");
}

TEST_CASE("mesh round trips through obj and ply") {
  ScalarGrid sph = grid_from(24, [](double x, double y, double z) {
    return testsup::sphere_sdf(x, y, z);
  });
  TriMesh mesh = marching_cubes(sph);

  write_mesh(mesh, "sphere_rt.obj", MeshFormat::obj);
  TriMesh via_obj = read_mesh("sphere_rt.obj");
  REQUIRE(via_obj.vertices.size() == mesh.vertices.size());
  REQUIRE(via_obj.triangles == mesh.triangles);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    CHECK(norm(via_obj.vertices[i] - mesh.vertices[i]) < 1e-12);
  std::remove("sphere_rt.obj");

  write_mesh(mesh, "sphere_rt.ply", MeshFormat::ply);
  TriMesh via_ply = read_mesh("sphere_rt.ply");
  REQUIRE(via_ply.vertices.size() == mesh.vertices.size());
  REQUIRE(via_ply.triangles == mesh.triangles);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    CHECK(norm(via_ply.vertices[i] - mesh.vertices[i]) < 1e-6);
  std::remove("sphere_rt.ply");
}

TEST_CASE("write_mesh applies the inverse normalization") {
  TriMesh tri;
  tri.vertices = {{0.5, 0.5, 0.5}, {0.6, 0.5, 0.5}, {0.5, 0.6, 0.5}};
  tri.triangles = {{0, 1, 2}};
  Transform t;
  t.scale = 0.4;
  t.offset = {0.5, 0.5, 0.5};
  write_mesh(tri, "transformed.obj", MeshFormat::obj, t);
  TriMesh back = read_mesh("transformed.obj");
  REQUIRE(back.vertices.size() == 3);
  CHECK(back.vertices[0].x == Catch::Approx(0.0).margin(1e-12));
  CHECK(back.vertices[1].x == Catch::Approx(0.25).margin(1e-12));
  std::remove("transformed.obj");

  CHECK_THROWS_AS(write_mesh(tri, "bad.obj", MeshFormat::obj, Transform{0.0, {0, 0, 0}, 0.0}),
                  InputError);
}

TEST_CASE("read_mesh errors") {
  CHECK_THROWS_AS(read_mesh("missing.obj"), IoError);
  CHECK_THROWS_AS(read_mesh("mesh.stl"), InputError);
  std::ofstream bad("bad_face.obj");
  bad << "v 0 0 0\nf 1 2 9\n";
  bad.close();
  CHECK_THROWS_AS(read_mesh("bad_face.obj"), ParseError);
  std::remove("bad_face.obj");
}
