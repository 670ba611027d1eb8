#pragma once

// Procedural meshes used by scenarios, fixtures and tests.

#include <optional>

#include "nexus/mesh.hpp"

namespace nexus {

// Rectangular grid spanned by edge vectors u and v, split into 2*nu*nv
// triangles wound so the surface normal follows cross(u, v).
inline TriangleMesh make_plane_grid(uint32_t chunk_id, const Vec3& origin, const Vec3& u,
                                    const Vec3& v, int nu, int nv,
                                    std::optional<Vec3> color = std::nullopt) {
  if (nu < 1 || nv < 1) throw Error(Errc::invalid_argument, "grid must have at least one cell");
  std::vector<MeshVertex> vertices;
  vertices.reserve(static_cast<size_t>(nu + 1) * (nv + 1));
  for (int j = 0; j <= nv; ++j) {
    for (int i = 0; i <= nu; ++i) {
      MeshVertex vert;
      vert.position = origin + u * (double(i) / nu) + v * (double(j) / nv);
      vert.color = color;
      vertices.push_back(vert);
    }
  }
  std::vector<std::array<uint32_t, 3>> tris;
  tris.reserve(static_cast<size_t>(nu) * nv * 2);
  const auto idx = [&](int i, int j) { return static_cast<uint32_t>(j * (nu + 1) + i); };
  for (int j = 0; j < nv; ++j) {
    for (int i = 0; i < nu; ++i) {
      tris.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
      tris.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
    }
  }
  return make_triangle_mesh(chunk_id, std::move(vertices), tris);
}

// Axis-aligned box with outward-facing triangles.
inline TriangleMesh make_box_mesh(uint32_t chunk_id, const Vec3& lo, const Vec3& hi,
                                  std::optional<Vec3> color = std::nullopt) {
  if (hi.x <= lo.x || hi.y <= lo.y || hi.z <= lo.z)
    throw Error(Errc::invalid_argument, "box extents must be positive");
  std::vector<MeshVertex> vertices(8);
  for (int i = 0; i < 8; ++i) {
    vertices[i].position = {i & 1 ? hi.x : lo.x, i & 2 ? hi.y : lo.y, i & 4 ? hi.z : lo.z};
    vertices[i].color = color;
  }
  static constexpr std::array<std::array<uint32_t, 3>, 12> kFaces{{
      {0, 2, 3}, {0, 3, 1},  // z = lo (normal -z)
      {4, 5, 7}, {4, 7, 6},  // z = hi (+z)
      {0, 1, 5}, {0, 5, 4},  // y = lo (-y)
      {2, 6, 7}, {2, 7, 3},  // y = hi (+y)
      {0, 4, 6}, {0, 6, 2},  // x = lo (-x)
      {1, 3, 7}, {1, 7, 5},  // x = hi (+x)
  }};
  return make_triangle_mesh(chunk_id, std::move(vertices),
                            {kFaces.begin(), kFaces.end()});
}

}  // namespace nexus
