#pragma once

// Background plane model and seeded RANSAC refinement. The capture seed
// plane is always the first hypothesis; the winner is refit by least squares
// over its inliers. Deterministic for a given rng seed.

#include <vector>

#include "nexus/core.hpp"

namespace nexus::replica {

struct PlaneModel {
  Vec3 normal{0, 0, 1};        // unit
  double offset = 0.0;         // normal . p = offset on the plane
  double inlier_threshold = 0.008;  // meters

  double signed_distance(const Vec3& p) const { return dot(normal, p) - offset; }
};

struct PlaneFit {
  PlaneModel plane;
  std::vector<uint8_t> inlier_mask;  // parallel to the input points
  size_t inlier_count = 0;
};

namespace detail {

struct PlaneLsq {
  Vec3 normal;
  double offset;
  double lambda1;  // second-smallest covariance eigenvalue, collinearity gauge
};

inline PlaneLsq plane_least_squares(const std::vector<Vec3>& points,
                                    const std::vector<uint8_t>* mask) {
  Vec3 centroid;
  size_t n = 0;
  for (size_t i = 0; i < points.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    centroid += points[i];
    ++n;
  }
  if (n < 3) throw Error(Errc::insufficient_points, "plane fit needs at least 3 points");
  centroid *= 1.0 / double(n);

  std::array<std::array<double, 3>, 3> cov{};
  for (size_t i = 0; i < points.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    const Vec3 d = points[i] - centroid;
    const double v[3] = {d.x, d.y, d.z};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cov[r][c] += v[r] * v[c];
  }

  const SymEigen<3> eig = jacobi_eigen<3>(cov);
  const Vec3 normal = normalized(Vec3{eig.vectors[0][0], eig.vectors[0][1], eig.vectors[0][2]});
  return {normal, dot(normal, centroid), eig.values[1]};
}

}  // namespace detail

inline PlaneFit fit_plane_ransac(const std::vector<Vec3>& points, const PlaneModel& seed,
                                 int iterations, double threshold, uint64_t rng_seed) {
  if (points.size() < 3) throw Error(Errc::insufficient_points, "need at least 3 points");

  {
    const auto overall = detail::plane_least_squares(points, nullptr);
    const double scale = std::max(1e-12, norm2(points.front()) + 1.0);
    if (overall.lambda1 <= 1e-12 * scale * points.size())
      throw Error(Errc::insufficient_points, "points are collinear");
  }

  const auto count_inliers = [&](const Vec3& n, double d) {
    size_t c = 0;
    for (const Vec3& p : points)
      if (std::abs(dot(n, p) - d) <= threshold) ++c;
    return c;
  };

  Vec3 best_n = normalized(seed.normal);
  double best_d = seed.offset;
  size_t best_count = count_inliers(best_n, best_d);

  Rng rng(rng_seed);
  for (int it = 0; it < iterations; ++it) {
    const size_t a = rng.index(points.size());
    const size_t b = rng.index(points.size());
    const size_t c = rng.index(points.size());
    if (a == b || b == c || a == c) continue;
    const Vec3 n = cross(points[b] - points[a], points[c] - points[a]);
    if (norm(n) < 1e-12) continue;
    const Vec3 nu = normalized(n);
    const double d = dot(nu, points[a]);
    const size_t count = count_inliers(nu, d);
    if (count > best_count) {
      best_count = count;
      best_n = nu;
      best_d = d;
    }
  }

  std::vector<uint8_t> mask(points.size(), 0);
  for (size_t i = 0; i < points.size(); ++i)
    mask[i] = std::abs(dot(best_n, points[i]) - best_d) <= threshold ? 1 : 0;

  const auto refit = detail::plane_least_squares(points, &mask);
  Vec3 n = refit.normal;
  double d = refit.offset;
  // Keep the seed's orientation so the camera-side convention is stable.
  if (dot(n, normalized(seed.normal)) < 0) {
    n = -n;
    d = -d;
  }

  PlaneFit fit;
  fit.plane = {n, d, threshold};
  fit.inlier_mask.resize(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    fit.inlier_mask[i] = std::abs(fit.plane.signed_distance(points[i])) <= threshold ? 1 : 0;
    fit.inlier_count += fit.inlier_mask[i];
  }
  return fit;
}

}  // namespace nexus::replica
