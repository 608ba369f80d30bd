#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridfit/errors.hpp"
#include "gridfit/ply.hpp"
#include "gridfit/vec3.hpp"

namespace gridfit {

// Uniform scale + translation mapping original coordinates into the unit
// cube: p_norm = scale * p + offset.
struct Transform {
  double scale = 1.0;
  Vec3 offset{0.0, 0.0, 0.0};
  double margin = 0.0;

  Vec3 apply(const Vec3& p) const { return scale * p + offset; }
  Vec3 invert(const Vec3& p) const { return (p - offset) / scale; }

  nlohmann::json to_json() const {
    return {{"scale", scale}, {"offset", {offset.x, offset.y, offset.z}}, {"margin", margin}};
  }
  static Transform from_json(const nlohmann::json& j) {
    Transform t;
    t.scale = j.at("scale").get<double>();
    auto o = j.at("offset");
    t.offset = {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()};
    t.margin = j.value("margin", 0.0);
    return t;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << to_json().dump(2) << "\n";
  }
  static Transform load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ": " + e.what());
    }
    return from_json(j);
  }
};

// Oriented point samples. `transform` maps the coordinates the file carried
// into the coordinates stored here (identity straight after loading).
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;  // empty when absent, else one per point
  Transform transform;

  std::size_t size() const { return positions.size(); }
  bool has_normals() const { return !normals.empty(); }
};

// --- loading --------------------------------------------------------------

// Whitespace-separated lines of 3 floats (positions) or 6 (positions then
// normals); '#' starts a comment. Column count must be consistent.
inline PointCloud load_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  PointCloud pc;
  std::string line;
  int cols = 0;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    double v[6];
    int n = 0;
    const char* p = line.c_str();
    for (; n < 6; ++n) {
      char* after = nullptr;
      double x = std::strtod(p, &after);
      if (after == p) break;
      v[n] = x;
      p = after;
    }
    while (*p != '\0' && std::isspace(static_cast<unsigned char>(*p))) ++p;
    if (n == 0 && *p == '\0') continue;  // blank or comment-only line
    if ((n != 3 && n != 6) || *p != '\0')
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 3 or 6 numbers");
    if (cols == 0) cols = n;
    if (n != cols)
      throw ParseError(path + ":" + std::to_string(lineno) + ": inconsistent column count (" +
                       std::to_string(n) + " vs " + std::to_string(cols) + ")");
    for (int a = 0; a < n; ++a)
      if (!std::isfinite(v[a]))
        throw ParseError(path + ":" + std::to_string(lineno) + ": non-finite coordinate");
    pc.positions.push_back({v[0], v[1], v[2]});
    if (n == 6) pc.normals.push_back({v[3], v[4], v[5]});
  }
  return pc;
}

inline PointCloud load_ply_points(const std::string& path) {
  ply::File f = ply::read_file(path);
  PointCloud pc;
  ply::Cursor cur(f);
  for (const auto& elem : f.elements) {
    if (elem.name != "vertex") {
      for (std::size_t r = 0; r < elem.count; ++r)
        for (const auto& p : elem.props) cur.skip(p);
      continue;
    }
    bool with_normals = elem.find("nx") && elem.find("ny") && elem.find("nz");
    if (!elem.find("x") || !elem.find("y") || !elem.find("z"))
      throw ParseError(path + ": vertex element lacks x/y/z properties");
    pc.positions.reserve(elem.count);
    if (with_normals) pc.normals.reserve(elem.count);
    for (std::size_t r = 0; r < elem.count; ++r) {
      Vec3 pos, nrm;
      bool saw_n = false;
      for (const auto& p : elem.props) {
        if (p.is_list) {
          cur.skip(p);
          continue;
        }
        double v = cur.scalar(p.type);
        if (p.name == "x") pos.x = v;
        else if (p.name == "y") pos.y = v;
        else if (p.name == "z") pos.z = v;
        else if (p.name == "nx") { nrm.x = v; saw_n = true; }
        else if (p.name == "ny") nrm.y = v;
        else if (p.name == "nz") nrm.z = v;
      }
      if (!finite(pos)) throw ParseError(path + ": non-finite vertex coordinate");
      pc.positions.push_back(pos);
      if (with_normals && saw_n) pc.normals.push_back(nrm);
    }
  }
  if (pc.positions.empty()) throw ParseError(path + ": no vertex element");
  if (!pc.normals.empty() && pc.normals.size() != pc.positions.size())
    throw ParseError(path + ": normal count does not match vertex count");
  return pc;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Loads an oriented point cloud, picking the parser from the extension.
inline PointCloud load_points(const std::string& path) {
  if (ends_with(path, ".ply")) return load_ply_points(path);
  if (ends_with(path, ".xyz") || ends_with(path, ".txt")) return load_xyz(path);
  throw InputError("unrecognized point-cloud extension (want .xyz or .ply): " + path);
}

// --- saving (fixtures, subsampled outputs, round trips) --------------------

inline void save_xyz(const PointCloud& pc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  char buf[256];
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Vec3& p = pc.positions[i];
    if (pc.has_normals()) {
      const Vec3& n = pc.normals[i];
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g\n", p.x, p.y, p.z,
                    n.x, n.y, n.z);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
    }
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

inline void save_ply_points(const PointCloud& pc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << pc.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (pc.has_normals())
    out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";
  std::string payload;
  payload.reserve(pc.size() * (pc.has_normals() ? 48 : 24));
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Vec3& p = pc.positions[i];
    ply::write_scalar_le(payload, p.x, ply::Type::f64);
    ply::write_scalar_le(payload, p.y, ply::Type::f64);
    ply::write_scalar_le(payload, p.z, ply::Type::f64);
    if (pc.has_normals()) {
      const Vec3& n = pc.normals[i];
      ply::write_scalar_le(payload, n.x, ply::Type::f64);
      ply::write_scalar_le(payload, n.y, ply::Type::f64);
      ply::write_scalar_le(payload, n.z, ply::Type::f64);
    }
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("write failed: " + path);
}

// --- normalization ---------------------------------------------------------

/// Maps the tight bounding box into [margin, 1-margin]^3, centered, with a
/// single isotropic scale so normals keep their directions. The transform is
/// recorded on the returned cloud.
inline PointCloud normalize(const PointCloud& in, double margin = 0.1) {
  if (in.positions.empty()) throw InputError("empty point set");
  if (!(margin > 0.0 && margin < 0.5)) throw ConfigError("margin must be in (0, 0.5)");
  Vec3 lo = in.positions.front(), hi = lo;
  for (const Vec3& p : in.positions) {
    lo.x = std::min(lo.x, p.x); hi.x = std::max(hi.x, p.x);
    lo.y = std::min(lo.y, p.y); hi.y = std::max(hi.y, p.y);
    lo.z = std::min(lo.z, p.z); hi.z = std::max(hi.z, p.z);
  }
  double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
  if (!(extent > 0.0)) throw InputError("degenerate bounding box: all points coincide");

  Transform t;
  t.margin = margin;
  t.scale = (1.0 - 2.0 * margin) / extent;
  // Center each axis inside [margin, 1-margin].
  Vec3 mid = 0.5 * (lo + hi);
  t.offset = Vec3{0.5, 0.5, 0.5} - t.scale * mid;

  PointCloud out;
  out.transform = t;
  out.positions.reserve(in.size());
  for (const Vec3& p : in.positions) out.positions.push_back(t.apply(p));
  out.normals = in.normals;  // directions are scale-invariant
  if (out.has_normals()) {
    for (const Vec3& n : out.normals) {
      if (std::abs(norm(n) - 1.0) > 1e-6)
        throw InputError("normals must be unit length (within 1e-6)");
    }
  }
  return out;
}

/// Uniform sample without replacement of ceil(fraction * m) points.
inline PointCloud subsample(const PointCloud& in, double fraction, std::mt19937_64& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("subsample fraction must be in (0, 1]");
  std::size_t m = in.size();
  std::size_t k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(m)));
  k = std::min(k, m);
  std::vector<std::uint32_t> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, m - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  PointCloud out;
  out.transform = in.transform;
  out.positions.reserve(k);
  if (in.has_normals()) out.normals.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.positions.push_back(in.positions[idx[i]]);
    if (in.has_normals()) out.normals.push_back(in.normals[idx[i]]);
  }
  return out;
}

}  // namespace gridfit
