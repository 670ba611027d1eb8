#pragma once

// Selection frusta: the infinite pyramid spanned by the camera position and
// four raycast surface points. Used to cut out mesh regions; a triangle is
// selected only when all three vertices lie inside every side plane.

#include <cstdint>
#include <map>
#include <vector>

#include "nexus/mesh.hpp"

namespace nexus {

struct FrustumPlane {
  Vec3 normal;     // unit, points into the pyramid interior
  double offset = 0.0;  // normal . apex

  double signed_distance(const Vec3& p) const { return dot(normal, p) - offset; }
};

struct SelectionFrustum {
  Vec3 apex;
  std::array<Vec3, 4> boundary_points;  // counter-clockwise as seen from the apex
  std::array<FrustumPlane, 4> side_planes;

  bool contains(const Vec3& p) const {
    for (const auto& plane : side_planes)
      if (plane.signed_distance(p) < 0.0) return false;
    return true;
  }
};

inline SelectionFrustum build_frustum(const Vec3& apex, const std::array<Vec3, 4>& points) {
  std::array<Vec3, 4> dirs;
  for (int i = 0; i < 4; ++i) {
    const Vec3 off = points[i] - apex;
    if (norm(off) < 1e-6)
      throw Error(Errc::degenerate_selection, "selection point coincides with apex");
    dirs[i] = normalized(off);
  }
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (norm(points[i] - points[j]) < 1e-9)
        throw Error(Errc::degenerate_selection, "selection points are not distinct");

  // Orientation of the quad of directions: each side plane (apex + two
  // consecutive rays) must keep the remaining two rays strictly on one side.
  // Consistently positive means the given order is already CCW; consistently
  // negative means CW input, which we reverse; mixed signs mean a nonconvex
  // or apex-coplanar selection.
  const auto side_sign = [&](const std::array<Vec3, 4>& d) {
    int sign = 0;
    for (int i = 0; i < 4; ++i) {
      const Vec3 n = cross(d[i], d[(i + 1) % 4]);
      if (norm(n) < 1e-12) return 0;  // consecutive rays collinear with apex
      for (int j = 0; j < 4; ++j) {
        if (j == i || j == (i + 1) % 4) continue;
        const double s = dot(n, d[j]);
        if (std::abs(s) < 1e-12) return 0;
        const int ss = s > 0 ? 1 : -1;
        if (sign == 0) sign = ss;
        else if (sign != ss) return 0;
      }
    }
    return sign;
  };

  SelectionFrustum f;
  f.apex = apex;
  f.boundary_points = points;
  std::array<Vec3, 4> d = dirs;

  int sign = side_sign(d);
  if (sign < 0) {
    // CW input: reverse while keeping the first point first.
    f.boundary_points = {points[0], points[3], points[2], points[1]};
    d = {dirs[0], dirs[3], dirs[2], dirs[1]};
    sign = side_sign(d);
  }
  if (sign <= 0)
    throw Error(Errc::degenerate_selection, "selection quad is nonconvex or coplanar with apex");

  for (int i = 0; i < 4; ++i) {
    const Vec3 n = normalized(cross(d[i], d[(i + 1) % 4]));
    f.side_planes[i] = {n, dot(n, apex)};
  }
  return f;
}

struct TriangleRef {
  uint32_t chunk_id = 0;
  uint32_t triangle = 0;
  auto operator<=>(const TriangleRef&) const = default;
};

struct SelectionResult {
  TriangleMesh mesh;                 // compacted cutout source mesh
  std::vector<TriangleRef> sources;  // provenance, parallel to mesh.triangles
};

inline SelectionResult select_triangles(const MeshSet& set, const SelectionFrustum& frustum) {
  SelectionResult out;
  out.mesh.chunk_id = 0;

  std::vector<std::array<uint32_t, 3>> tris;
  for (const auto& [chunk_id, mesh] : set.chunks) {
    std::map<uint32_t, uint32_t> remap;
    for (size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
      const auto& t = mesh.triangles[ti];
      bool inside = true;
      for (int k = 0; k < 3 && inside; ++k)
        inside = frustum.contains(mesh.vertices[t[k]].position);
      if (!inside) continue;

      std::array<uint32_t, 3> nt;
      for (int k = 0; k < 3; ++k) {
        auto [it, fresh] = remap.try_emplace(t[k], static_cast<uint32_t>(out.mesh.vertices.size()));
        if (fresh) out.mesh.vertices.push_back(mesh.vertices[t[k]]);
        nt[k] = it->second;
      }
      tris.push_back(nt);
      out.sources.push_back({chunk_id, static_cast<uint32_t>(ti)});
    }
  }
  if (tris.empty()) throw Error(Errc::empty_selection, "no triangle lies in the selection frustum");

  out.mesh.triangles = std::move(tris);
  for (const auto& v : out.mesh.vertices) out.mesh.bounds.grow(v.position);
  return out;
}

}  // namespace nexus
