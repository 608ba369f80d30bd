#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "gridfit/errors.hpp"
#include "gridfit/grid.hpp"
#include "gridfit/ingest.hpp"
#include "gridfit/mc_tables.hpp"
#include "gridfit/ply.hpp"
#include "gridfit/vec3.hpp"

namespace gridfit {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<Vec3> normals;  // optional, per vertex

  bool empty() const { return triangles.empty(); }
  bool has_normals() const { return !normals.empty(); }
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * norm(cross(b - a, c - a));
}

inline double mesh_area(const TriMesh& mesh) {
  double area = 0.0;
  for (const auto& t : mesh.triangles)
    area += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
  return area;
}

/// True when every undirected edge is shared by exactly two triangles.
inline bool is_watertight(const TriMesh& mesh) {
  if (mesh.empty()) return false;
  std::unordered_map<std::uint64_t, int> edge_count;
  edge_count.reserve(mesh.triangles.size() * 3);
  for (const auto& t : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      std::uint64_t a = t[e], b = t[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edge_count[(a << 32) | b];
    }
  for (const auto& [key, count] : edge_count)
    if (count != 2) return false;
  return true;
}

/// Number of edge-connected components among used vertices.
inline std::size_t connected_components(const TriMesh& mesh) {
  std::vector<std::uint32_t> parent(mesh.vertices.size());
  std::iota(parent.begin(), parent.end(), 0u);
  std::vector<std::uint8_t> used(mesh.vertices.size(), 0);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& t : mesh.triangles) {
    used[t[0]] = used[t[1]] = used[t[2]] = 1;
    parent[find(t[1])] = find(t[0]);
    parent[find(t[2])] = find(t[0]);
  }
  std::size_t n = 0;
  for (std::uint32_t i = 0; i < parent.size(); ++i)
    if (used[i] && find(i) == i) ++n;
  return n;
}

/// Standard 256-case marching cubes on the grid's voxels (restricted to the
/// active voxels plus their face neighbors when a set is given). Edge
/// vertices interpolate linearly between corner values and are welded by
/// lattice-edge identity, so closed level sets come out watertight. A corner
/// value exactly equal to iso counts as outside (f - iso treated as +0).
/// Triangles are wound so the right-hand normal points toward increasing f.
inline TriMesh marching_cubes(const ScalarGrid& grid, double iso = 0.0,
                              const ActiveSet* active = nullptr) {
  const int res = grid.res();
  for (double v : grid.values())
    if (!std::isfinite(v)) throw InputError("marching_cubes: grid has non-finite values");

  std::vector<std::uint8_t> candidate;
  if (active) {
    if (active->res != res)
      throw std::invalid_argument("marching_cubes: active set resolution mismatch");
    candidate.assign(grid.voxel_count(), 0);
    for (std::uint32_t vid : active->voxels) {
      candidate[vid] = 1;
      int i, j, k;
      grid.voxel_coords(vid, i, j, k);
      if (i > 0) candidate[grid.voxel_id(i - 1, j, k)] = 1;
      if (i < res - 1) candidate[grid.voxel_id(i + 1, j, k)] = 1;
      if (j > 0) candidate[grid.voxel_id(i, j - 1, k)] = 1;
      if (j < res - 1) candidate[grid.voxel_id(i, j + 1, k)] = 1;
      if (k > 0) candidate[grid.voxel_id(i, j, k - 1)] = 1;
      if (k < res - 1) candidate[grid.voxel_id(i, j, k + 1)] = 1;
    }
  }

  // Corner offsets in table order.
  static constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                        {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};

  TriMesh mesh;
  std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;

  auto edge_point = [&](int i, int j, int k, int e) -> std::uint32_t {
    const int* c0 = kCorner[mc::kEdgeCorners[e][0]];
    const int* c1 = kCorner[mc::kEdgeCorners[e][1]];
    int a0 = i + c0[0], b0 = j + c0[1], d0 = k + c0[2];
    int a1 = i + c1[0], b1 = j + c1[1], d1 = k + c1[2];
    int axis = (a0 != a1) ? 0 : (b0 != b1) ? 1 : 2;
    // canonical direction: from the lower node along the axis
    if (a0 + b0 + d0 > a1 + b1 + d1) {
      std::swap(a0, a1);
      std::swap(b0, b1);
      std::swap(d0, d1);
    }
    std::uint64_t key = static_cast<std::uint64_t>(grid.node_id(a0, b0, d0)) * 3 + axis;
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;

    double v0 = grid.value(a0, b0, d0), v1 = grid.value(a1, b1, d1);
    double t = (iso - v0) / (v1 - v0);
    if (t < 0.0) t = 0.0;
    if (t > 1.0) t = 1.0;
    Vec3 p0 = grid.node_pos(a0, b0, d0), p1 = grid.node_pos(a1, b1, d1);
    Vec3 p = p0 + t * (p1 - p0);
    std::uint32_t id = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back(p);
    edge_vertex.emplace(key, id);
    return id;
  };

  double vals[8];
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j)
      for (int k = 0; k < res; ++k) {
        if (active && !candidate[grid.voxel_id(i, j, k)]) continue;
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          vals[c] = grid.value(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
          if (vals[c] < iso) cube |= 1 << c;
        }
        if (mc::kEdgeTable[cube] == 0) continue;
        std::uint32_t on_edge[12];
        for (int e = 0; e < 12; ++e)
          if (mc::kEdgeTable[cube] & (1 << e)) on_edge[e] = edge_point(i, j, k, e);
        const auto& tri = mc::kTriTable[cube];
        for (int s = 0; tri[s] != -1; s += 3) {
          std::array<std::uint32_t, 3> t = {on_edge[tri[s]], on_edge[tri[s + 1]],
                                            on_edge[tri[s + 2]]};
          if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
          if (triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]) < 1e-14)
            continue;
          mesh.triangles.push_back(t);
        }
      }

  // Per-vertex normals from the field gradient, matching the winding.
  mesh.normals.reserve(mesh.vertices.size());
  for (const Vec3& p : mesh.vertices) mesh.normals.push_back(normalized(grid.grad_at(p)));
  if (mesh.triangles.empty()) {
    mesh.vertices.clear();
    mesh.normals.clear();
  }
  return mesh;
}

// --- mesh file i/o ----------------------------------------------------------

enum class MeshFormat { obj, ply };

inline MeshFormat mesh_format_of(const std::string& path) {
  if (ends_with(path, ".obj")) return MeshFormat::obj;
  if (ends_with(path, ".ply")) return MeshFormat::ply;
  throw InputError("unrecognized mesh extension (want .obj or .ply): " + path);
}

/// Writes the mesh with vertices mapped back through the inverse of
/// `transform` (pass identity to keep coordinates as-is).
inline void write_mesh(const TriMesh& mesh, const std::string& path, MeshFormat format,
                       const Transform& transform = {}) {
  if (!(transform.scale > 0.0)) throw InputError("write_mesh: non-invertible transform");
  if (format == MeshFormat::obj) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    char buf[160];
    for (const Vec3& v : mesh.vertices) {
      Vec3 p = transform.invert(v);
      std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", p.x, p.y, p.z);
      out << buf;
    }
    for (const auto& t : mesh.triangles)
      out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
    if (!out) throw IoError("write failed: " + path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  bool with_normals = mesh.has_normals() && mesh.normals.size() == mesh.vertices.size();
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (with_normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "element face " << mesh.triangles.size() << "\n";
  out << "property list uchar int vertex_indices\n";
  out << "end_header\n";
  std::string payload;
  payload.reserve(mesh.vertices.size() * (with_normals ? 48 : 24) + mesh.triangles.size() * 13);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    Vec3 p = transform.invert(mesh.vertices[i]);
    ply::write_scalar_le(payload, p.x, ply::Type::f64);
    ply::write_scalar_le(payload, p.y, ply::Type::f64);
    ply::write_scalar_le(payload, p.z, ply::Type::f64);
    if (with_normals) {
      const Vec3& n = mesh.normals[i];
      ply::write_scalar_le(payload, n.x, ply::Type::f64);
      ply::write_scalar_le(payload, n.y, ply::Type::f64);
      ply::write_scalar_le(payload, n.z, ply::Type::f64);
    }
  }
  for (const auto& t : mesh.triangles) {
    ply::write_scalar_le(payload, 3, ply::Type::u8);
    for (int e = 0; e < 3; ++e) ply::write_scalar_le(payload, t[e], ply::Type::i32);
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline TriMesh read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  TriMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("v ", 0) == 0) {
      Vec3 p;
      if (std::sscanf(line.c_str(), "v %lf %lf %lf", &p.x, &p.y, &p.z) != 3)
        throw ParseError(path + ":" + std::to_string(lineno) + ": malformed vertex");
      mesh.vertices.push_back(p);
    } else if (line.rfind("f ", 0) == 0) {
      long a = 0, b = 0, c = 0;
      // accept "f i j k" and "f i/.. j/.. k/.." forms
      if (std::sscanf(line.c_str(), "f %ld/%*s %ld/%*s %ld", &a, &b, &c) != 3 &&
          std::sscanf(line.c_str(), "f %ld %ld %ld", &a, &b, &c) != 3)
        throw ParseError(path + ":" + std::to_string(lineno) + ": malformed face");
      if (a < 1 || b < 1 || c < 1 || a > static_cast<long>(mesh.vertices.size()) ||
          b > static_cast<long>(mesh.vertices.size()) || c > static_cast<long>(mesh.vertices.size()))
        throw ParseError(path + ":" + std::to_string(lineno) + ": face index out of range");
      mesh.triangles.push_back({static_cast<std::uint32_t>(a - 1), static_cast<std::uint32_t>(b - 1),
                                static_cast<std::uint32_t>(c - 1)});
    }
  }
  return mesh;
}

inline TriMesh read_ply_mesh(const std::string& path) {
  ply::File f = ply::read_file(path);
  TriMesh mesh;
  ply::Cursor cur(f);
  for (const auto& elem : f.elements) {
    if (elem.name == "vertex") {
      bool with_normals = elem.find("nx") && elem.find("ny") && elem.find("nz");
      for (std::size_t r = 0; r < elem.count; ++r) {
        Vec3 pos, nrm;
        for (const auto& p : elem.props) {
          if (p.is_list) {
            cur.skip(p);
            continue;
          }
          double v = cur.scalar(p.type);
          if (p.name == "x") pos.x = v;
          else if (p.name == "y") pos.y = v;
          else if (p.name == "z") pos.z = v;
          else if (p.name == "nx") nrm.x = v;
          else if (p.name == "ny") nrm.y = v;
          else if (p.name == "nz") nrm.z = v;
        }
        mesh.vertices.push_back(pos);
        if (with_normals) mesh.normals.push_back(nrm);
      }
    } else if (elem.name == "face") {
      for (std::size_t r = 0; r < elem.count; ++r) {
        for (const auto& p : elem.props) {
          if (!p.is_list) {
            cur.scalar(p.type);
            continue;
          }
          std::size_t n = cur.list_count(p.count_type);
          std::vector<std::uint32_t> poly(n);
          for (std::size_t e = 0; e < n; ++e) {
            double v = cur.scalar(p.type);
            if (v < 0 || v >= static_cast<double>(mesh.vertices.size()))
              throw ParseError(path + ": face index out of range");
            poly[e] = static_cast<std::uint32_t>(v);
          }
          for (std::size_t e = 2; e < n; ++e)  // fan-triangulate
            mesh.triangles.push_back({poly[0], poly[e - 1], poly[e]});
        }
      }
    } else {
      for (std::size_t r = 0; r < elem.count; ++r)
        for (const auto& p : elem.props) cur.skip(p);
    }
  }
  return mesh;
}

inline TriMesh read_mesh(const std::string& path) {
  return mesh_format_of(path) == MeshFormat::obj ? read_obj(path) : read_ply_mesh(path);
}

}  // namespace gridfit
