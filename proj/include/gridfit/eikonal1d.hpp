#pragma once

// 1D study of why the bare eikonal energy cannot pick the distance function:
// profiles with unit slopes in every cell all have zero eikonal energy, while
// the node-based viscosity residual charges each fold, separating the true
// distance profile (one fold) from a zigzag (a fold at every other node).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "gridfit/errors.hpp"
#include "gridfit/losses.hpp"

namespace gridfit {

struct Profile1D {
  int res = 0;                 // cells; res+1 node values
  std::vector<double> values;

  double h() const { return 1.0 / res; }
};

/// Exact eikonal energy of the piecewise-linear interpolant: the integrand
/// (|f'| - 1)^2 is constant per cell, so this is the mean over cells of
/// (|slope| - 1)^2.
inline double eikonal_energy_1d(const Profile1D& p) {
  double acc = 0.0;
  double inv_h = static_cast<double>(p.res);
  for (int c = 0; c < p.res; ++c) {
    double slope = (p.values[c + 1] - p.values[c]) * inv_h;
    double r = std::abs(slope) - 1.0;
    acc += r * r;
  }
  return acc / p.res;
}

/// Node-based viscosity loss with symmetric differences, the 1D analog of the
/// volumetric one: mean over interior nodes of
///   ((|D f| - 1) sign(f) - epsilon * D2 f)^2.
inline double viscosity_loss_1d(const Profile1D& p, double epsilon) {
  if (p.res < 2) throw InputError("viscosity_loss_1d: need at least 2 cells");
  double inv2h = 0.5 * p.res;
  double invh2 = static_cast<double>(p.res) * p.res;
  double acc = 0.0;
  for (int i = 1; i < p.res; ++i) {
    double d = (p.values[i + 1] - p.values[i - 1]) * inv2h;
    double lap = (p.values[i + 1] - 2.0 * p.values[i] + p.values[i - 1]) * invh2;
    double r = (std::abs(d) - 1.0) * sign_of(p.values[i]) - epsilon * lap;
    acc += r * r;
  }
  return acc / (p.res - 1);
}

/// Signed distance to {q1, q2} with the inside negative: a V with its single
/// fold at the midpoint. q1 and q2 must be node positions.
inline Profile1D sdf_profile_1d(int res, double q1, double q2) {
  Profile1D p;
  p.res = res;
  p.values.resize(res + 1);
  double mid = 0.5 * (q1 + q2), d = 0.5 * (q2 - q1);
  for (int i = 0; i <= res; ++i) {
    double x = static_cast<double>(i) / res;
    p.values[i] = std::abs(x - mid) - d;
  }
  return p;
}

/// Unit-slope sawtooth vanishing at q1 and q2 (and every other even node):
/// node values cycle 0, +h, 0, -h. Same eikonal energy as the SDF profile,
/// but a fold at every odd node.
inline Profile1D zigzag_profile_1d(int res, double q1, double q2) {
  int a = static_cast<int>(std::lround(q1 * res));
  int b = static_cast<int>(std::lround(q2 * res));
  if (a % 2 != 0 || b % 2 != 0)
    throw InputError("zigzag_profile_1d: constraint points must sit on even nodes");
  Profile1D p;
  p.res = res;
  p.values.resize(res + 1);
  double h = 1.0 / res;
  static constexpr double kTooth[4] = {0.0, 1.0, 0.0, -1.0};
  for (int i = 0; i <= res; ++i)
    p.values[i] = h * kTooth[((i - a) % 4 + 4) % 4];
  return p;
}

struct EikonalDemoResult {
  Profile1D sdf, zigzag;
  double eikonal_sdf = 0.0, eikonal_zigzag = 0.0;
  double viscosity_sdf = 0.0, viscosity_zigzag = 0.0;
  double epsilon = 1e-2;
};

inline EikonalDemoResult run_eikonal_demo_1d(int res = 64, double q1 = 0.25, double q2 = 0.75,
                                             double epsilon = 1e-2) {
  EikonalDemoResult r;
  r.epsilon = epsilon;
  r.sdf = sdf_profile_1d(res, q1, q2);
  r.zigzag = zigzag_profile_1d(res, q1, q2);
  r.eikonal_sdf = eikonal_energy_1d(r.sdf);
  r.eikonal_zigzag = eikonal_energy_1d(r.zigzag);
  r.viscosity_sdf = viscosity_loss_1d(r.sdf, epsilon);
  r.viscosity_zigzag = viscosity_loss_1d(r.zigzag, epsilon);
  return r;
}

/// One row per (profile, node): profile,i,x,f. Exactly 2*(res+1) data rows.
inline void write_eikonal_demo_csv(const EikonalDemoResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "profile,i,x,f\n";
  char buf[128];
  auto dump = [&](const char* name, const Profile1D& p) {
    for (int i = 0; i <= p.res; ++i) {
      std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g\n", name, i,
                    static_cast<double>(i) / p.res, p.values[i]);
      out << buf;
    }
  };
  dump("sdf", r.sdf);
  dump("zigzag", r.zigzag);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace gridfit
