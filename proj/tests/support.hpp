#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gridfit/grid.hpp"
#include "gridfit/ingest.hpp"
#include "gridfit/vec3.hpp"

namespace testsup {

using gridfit::ScalarGrid;
using gridfit::Vec3;

inline ScalarGrid grid_from(int res, const std::function<double(double, double, double)>& f) {
  ScalarGrid g(res);
  for (int i = 0; i <= res; ++i)
    for (int j = 0; j <= res; ++j)
      for (int k = 0; k <= res; ++k) {
        Vec3 p = g.node_pos(i, j, k);
        g.value(i, j, k) = f(p.x, p.y, p.z);
      }
  return g;
}

inline ScalarGrid random_grid(int res, std::mt19937_64& rng, double lo = -0.5, double hi = 0.5) {
  ScalarGrid g(res);
  std::uniform_real_distribution<double> uni(lo, hi);
  for (double& v : g.values()) v = uni(rng);
  return g;
}

inline double sphere_sdf(double x, double y, double z, double r = 0.3) {
  double dx = x - 0.5, dy = y - 0.5, dz = z - 0.5;
  return std::sqrt(dx * dx + dy * dy + dz * dz) - r;
}

inline Vec3 random_point(std::mt19937_64& rng, double lo = 0.05, double hi = 0.95) {
  std::uniform_real_distribution<double> uni(lo, hi);
  return {uni(rng), uni(rng), uni(rng)};
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Vec3 v{gauss(rng), gauss(rng), gauss(rng)};
  double n = gridfit::norm(v);
  while (n < 1e-6) {
    v = {gauss(rng), gauss(rng), gauss(rng)};
    n = gridfit::norm(v);
  }
  return v / n;
}

// Central finite difference of loss(grid) with respect to node `id`.
inline double fd_node(ScalarGrid& g, std::uint32_t id,
                      const std::function<double(const ScalarGrid&)>& loss, double step = 1e-4) {
  double saved = g.values()[id];
  g.values()[id] = saved + step;
  double up = loss(g);
  g.values()[id] = saved - step;
  double down = loss(g);
  g.values()[id] = saved;
  return (up - down) / (2.0 * step);
}

// Points uniform on a sphere, with outward unit normals.
inline gridfit::PointCloud sphere_cloud(std::size_t n, double r, Vec3 center,
                                        std::mt19937_64& rng) {
  gridfit::PointCloud pc;
  pc.positions.reserve(n);
  pc.normals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 d = random_unit(rng);
    pc.positions.push_back(center + r * d);
    pc.normals.push_back(d);
  }
  return pc;
}

// Points uniform on the upper half (z >= center.z) of a sphere.
inline gridfit::PointCloud hemisphere_cloud(std::size_t n, double r, Vec3 center,
                                            std::mt19937_64& rng) {
  gridfit::PointCloud pc;
  pc.positions.reserve(n);
  pc.normals.reserve(n);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double u = uni(rng);                    // cos(polar angle), uniform -> uniform area
    double s = std::sqrt(1.0 - u * u);
    double phi = 2.0 * M_PI * uni(rng);
    Vec3 d{s * std::cos(phi), s * std::sin(phi), u};
    pc.positions.push_back(center + r * d);
    pc.normals.push_back(d);
  }
  return pc;
}

}  // namespace testsup
