#pragma once

// Triangle meshes, versioned mesh-set snapshots and ray casting. The
// intersector is the watertight permute-and-shear formulation, so rays
// crossing shared edges and vertices never fall through; back-face hits
// count.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "nexus/core.hpp"

namespace nexus {

struct MeshVertex {
  Vec3 position;
  std::optional<Vec3> color;  // RGB in [0,1]
  bool operator==(const MeshVertex&) const = default;
};

struct Aabb {
  Vec3 min{1e300, 1e300, 1e300};
  Vec3 max{-1e300, -1e300, -1e300};

  void grow(const Vec3& p) {
    min = componentwise_min(min, p);
    max = componentwise_max(max, p);
  }
  bool empty() const { return min.x > max.x; }
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * norm(cross(b - a, c - a));
}

struct TriangleMesh {
  uint32_t chunk_id = 0;
  std::vector<MeshVertex> vertices;
  std::vector<std::array<uint32_t, 3>> triangles;
  Aabb bounds;

  bool operator==(const TriangleMesh&) const = default;
};

// Validates indices and drops degenerate (area <= 1e-12 m^2) triangles.
inline TriangleMesh make_triangle_mesh(uint32_t chunk_id, std::vector<MeshVertex> vertices,
                                       const std::vector<std::array<uint32_t, 3>>& triangles) {
  TriangleMesh m;
  m.chunk_id = chunk_id;
  m.vertices = std::move(vertices);
  m.triangles.reserve(triangles.size());
  for (const auto& t : triangles) {
    for (uint32_t idx : t)
      if (idx >= m.vertices.size())
        throw Error(Errc::invalid_argument, "triangle index out of range");
    if (triangle_area(m.vertices[t[0]].position, m.vertices[t[1]].position,
                      m.vertices[t[2]].position) > 1e-12)
      m.triangles.push_back(t);
  }
  for (const auto& v : m.vertices) m.bounds.grow(v.position);
  return m;
}

// Versioned snapshot of the environment mesh, keyed by chunk id.
struct MeshSet {
  std::map<uint32_t, TriangleMesh> chunks;
  uint64_t version = 0;

  void upsert(TriangleMesh mesh) {
    chunks[mesh.chunk_id] = std::move(mesh);
    ++version;
  }

  bool remove(uint32_t chunk_id) {
    const bool erased = chunks.erase(chunk_id) > 0;
    if (erased) ++version;
    return erased;
  }

  size_t triangle_count() const {
    size_t n = 0;
    for (const auto& [id, m] : chunks) n += m.triangles.size();
    return n;
  }
};

struct RayHit {
  uint32_t chunk_id = 0;
  uint32_t triangle = 0;
  Vec3 point;
  double distance = 0.0;
};

namespace detail {

// Watertight ray precomputation: dominant-axis permutation plus shear
// constants (Woop, Benthin, Wald 2013).
struct WatertightRay {
  Vec3 origin;
  int kx, ky, kz;
  double sx, sy, sz;

  WatertightRay(const Vec3& org, const Vec3& dir) : origin(org) {
    kz = 0;
    if (std::abs(dir.y) > std::abs(dir[kz])) kz = 1;
    if (std::abs(dir.z) > std::abs(dir[kz])) kz = 2;
    kx = (kz + 1) % 3;
    ky = (kx + 1) % 3;
    if (dir[kz] < 0.0) std::swap(kx, ky);
    sx = dir[kx] / dir[kz];
    sy = dir[ky] / dir[kz];
    sz = 1.0 / dir[kz];
  }

  // Positive-t intersection; hits on either face count.
  std::optional<double> intersect(const Vec3& va, const Vec3& vb, const Vec3& vc) const {
    const Vec3 a = va - origin, b = vb - origin, c = vc - origin;
    const double ax = a[kx] - sx * a[kz], ay = a[ky] - sy * a[kz];
    const double bx = b[kx] - sx * b[kz], by = b[ky] - sy * b[kz];
    const double cx = c[kx] - sx * c[kz], cy = c[ky] - sy * c[kz];

    const double u = cx * by - cy * bx;
    const double v = ax * cy - ay * cx;
    const double w = bx * ay - by * ax;
    if ((u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0))
      return std::nullopt;

    const double det = u + v + w;
    if (det == 0.0) return std::nullopt;

    const double az = sz * a[kz], bz = sz * b[kz], cz = sz * c[kz];
    const double t = (u * az + v * bz + w * cz) / det;
    if (!(t > 0.0) || !std::isfinite(t)) return std::nullopt;
    return t;
  }
};

inline bool ray_hits_aabb(const Vec3& org, const Vec3& dir, const Aabb& box, double tmax) {
  double t0 = 0.0, t1 = tmax;
  const double o[3] = {org.x, org.y, org.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  const double lo[3] = {box.min.x, box.min.y, box.min.z};
  const double hi[3] = {box.max.x, box.max.y, box.max.z};
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-300) {
      if (o[i] < lo[i] || o[i] > hi[i]) return false;
      continue;
    }
    double a = (lo[i] - o[i]) / d[i];
    double b = (hi[i] - o[i]) / d[i];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace detail

inline std::optional<RayHit> raycast(const TriangleMesh& mesh, const Vec3& origin,
                                     const Vec3& direction) {
  if (std::abs(norm(direction) - 1.0) > 1e-9)
    throw Error(Errc::invalid_argument, "ray direction must be unit length");
  const detail::WatertightRay ray(origin, direction);

  std::optional<RayHit> best;
  for (size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    const auto hit = ray.intersect(mesh.vertices[t[0]].position, mesh.vertices[t[1]].position,
                                   mesh.vertices[t[2]].position);
    if (hit && (!best || *hit < best->distance)) {
      best = RayHit{mesh.chunk_id, static_cast<uint32_t>(i), origin + direction * *hit, *hit};
    }
  }
  return best;
}

inline std::optional<RayHit> raycast(const MeshSet& set, const Vec3& origin,
                                     const Vec3& direction) {
  if (std::abs(norm(direction) - 1.0) > 1e-9)
    throw Error(Errc::invalid_argument, "ray direction must be unit length");
  std::optional<RayHit> best;
  for (const auto& [id, mesh] : set.chunks) {
    if (mesh.triangles.empty()) continue;
    const double tmax = best ? best->distance : std::numeric_limits<double>::infinity();
    if (!detail::ray_hits_aabb(origin, direction, mesh.bounds, tmax)) continue;
    const auto hit = raycast(mesh, origin, direction);
    if (hit && (!best || hit->distance < best->distance)) best = hit;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Topology checks (used by the replica pipeline's quality gates).

inline int64_t euler_characteristic(const TriangleMesh& mesh) {
  std::set<uint32_t> used;
  std::set<std::pair<uint32_t, uint32_t>> edges;
  for (const auto& t : mesh.triangles) {
    for (int i = 0; i < 3; ++i) {
      used.insert(t[i]);
      const uint32_t a = t[i], b = t[(i + 1) % 3];
      edges.insert({std::min(a, b), std::max(a, b)});
    }
  }
  return static_cast<int64_t>(used.size()) - static_cast<int64_t>(edges.size()) +
         static_cast<int64_t>(mesh.triangles.size());
}

// Closed oriented surface: every undirected edge is shared by exactly two
// triangles, traversed once in each direction.
inline bool is_watertight(const TriangleMesh& mesh) {
  if (mesh.triangles.empty()) return false;
  std::map<std::pair<uint32_t, uint32_t>, int> directed;
  for (const auto& t : mesh.triangles) {
    for (int i = 0; i < 3; ++i) {
      const uint32_t a = t[i], b = t[(i + 1) % 3];
      if (a == b) return false;
      if (++directed[{a, b}] > 1) return false;
    }
  }
  for (const auto& [edge, count] : directed) {
    auto it = directed.find({edge.second, edge.first});
    if (it == directed.end() || it->second != 1) return false;
  }
  return true;
}

}  // namespace nexus
