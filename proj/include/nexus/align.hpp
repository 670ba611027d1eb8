#pragma once

// Coordinate-space alignment from two tripod anchor observations. Each
// anchor is a 0.10 m square marker; its four corners feed a closed-form
// absolute-orientation fit (Horn's quaternion method), so orientation
// information constrains the solution and not just the two positions.

#include <vector>

#include "nexus/core.hpp"

namespace nexus {

enum class AnchorId : uint8_t { front = 0, back = 1 };

struct AnchorObservation {
  AnchorId anchor_id = AnchorId::front;
  SimTransform observed_pose_in_peer_space;    // rigid, scale 1
  SimTransform canonical_pose_in_camera_space; // rigid, scale 1
};

inline constexpr double kMarkerHalfWidth = 0.05;  // meters

struct AlignmentResult {
  SimTransform transform;  // peer space -> camera space, scale 1
  double rms_residual = 0.0;
};

namespace detail {

inline std::array<Vec3, 4> marker_corners(const SimTransform& pose) {
  const double w = kMarkerHalfWidth;
  const Vec3 local[4] = {{-w, -w, 0}, {w, -w, 0}, {w, w, 0}, {-w, w, 0}};
  std::array<Vec3, 4> out;
  for (int i = 0; i < 4; ++i) out[i] = pose.apply(local[i]);
  return out;
}

}  // namespace detail

// Rigid T minimizing sum |T(observed corner) - canonical corner|^2 over the
// eight marker corners of the two anchors.
inline AlignmentResult align_spaces(const std::vector<AnchorObservation>& observations) {
  if (observations.size() != 2)
    throw Error(Errc::invalid_argument, "align_spaces requires exactly two observations");
  if (observations[0].anchor_id == observations[1].anchor_id)
    throw Error(Errc::invalid_argument, "align_spaces requires distinct anchor ids");
  for (const auto& obs : observations) {
    if (std::abs(obs.observed_pose_in_peer_space.scale - 1.0) > 1e-9 ||
        std::abs(obs.canonical_pose_in_camera_space.scale - 1.0) > 1e-9)
      throw Error(Errc::invalid_argument, "anchor poses must be rigid (scale 1)");
    if (std::abs(obs.observed_pose_in_peer_space.rotation.norm() - 1.0) > 1e-9 ||
        std::abs(obs.canonical_pose_in_camera_space.rotation.norm() - 1.0) > 1e-9)
      throw Error(Errc::invalid_argument, "anchor orientations must be unit quaternions");
  }
  if (norm(observations[0].observed_pose_in_peer_space.translation -
           observations[1].observed_pose_in_peer_space.translation) < 1e-6)
    throw Error(Errc::degenerate_anchors, "observed anchor positions coincide");

  std::vector<Vec3> src, dst;
  src.reserve(8);
  dst.reserve(8);
  for (const auto& obs : observations) {
    for (const Vec3& p : detail::marker_corners(obs.observed_pose_in_peer_space)) src.push_back(p);
    for (const Vec3& p : detail::marker_corners(obs.canonical_pose_in_camera_space)) dst.push_back(p);
  }

  Vec3 src_mean, dst_mean;
  for (size_t i = 0; i < src.size(); ++i) {
    src_mean += src[i];
    dst_mean += dst[i];
  }
  src_mean *= 1.0 / static_cast<double>(src.size());
  dst_mean *= 1.0 / static_cast<double>(dst.size());

  // Cross-covariance of centered correspondences.
  double s[3][3] = {};
  for (size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - src_mean;
    const Vec3 b = dst[i] - dst_mean;
    const double av[3] = {a.x, a.y, a.z};
    const double bv[3] = {b.x, b.y, b.z};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) s[r][c] += av[r] * bv[c];
  }

  // Horn's symmetric 4x4; its top eigenvector is the optimal rotation.
  std::array<std::array<double, 4>, 4> n{};
  n[0][0] = s[0][0] + s[1][1] + s[2][2];
  n[1][1] = s[0][0] - s[1][1] - s[2][2];
  n[2][2] = -s[0][0] + s[1][1] - s[2][2];
  n[3][3] = -s[0][0] - s[1][1] + s[2][2];
  n[0][1] = n[1][0] = s[1][2] - s[2][1];
  n[0][2] = n[2][0] = s[2][0] - s[0][2];
  n[0][3] = n[3][0] = s[0][1] - s[1][0];
  n[1][2] = n[2][1] = s[0][1] + s[1][0];
  n[1][3] = n[3][1] = s[2][0] + s[0][2];
  n[2][3] = n[3][2] = s[1][2] + s[2][1];

  const SymEigen<4> eig = jacobi_eigen<4>(n);
  const auto& q = eig.vectors[3];  // largest eigenvalue
  const UnitQuat rot = UnitQuat{q[0], q[1], q[2], q[3]}.normalized();

  SimTransform t{rot, dst_mean - rot.rotate(src_mean), 1.0};

  double sq = 0.0;
  for (size_t i = 0; i < src.size(); ++i) sq += norm2(t.apply(src[i]) - dst[i]);
  return {t, std::sqrt(sq / static_cast<double>(src.size()))};
}

}  // namespace nexus
