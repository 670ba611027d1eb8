#pragma once

// Foundational value types shared by every module: 3-vectors, unit
// quaternions, similarity transforms, small symmetric eigen solves and a
// deterministic RNG. All internal math is double precision; wire formats
// quantize to 32-bit floats at the protocol boundary.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace nexus {

inline constexpr double kPi = 3.14159265358979323846;

enum class Errc {
  invalid_argument,
  degenerate_anchors,
  out_of_lens_field,
  degenerate_selection,
  empty_selection,
  parse_error,
  bad_length,
  bad_checksum,
  non_unit_direction,
  bad_flag,
  truncated,
  unknown_tag,
  length_mismatch,
  unknown_object,
  unknown_cutout,
  stale_seq,
  grab_conflict,
  role_violation,
  insufficient_points,
  empty_mask,
  empty_grid,
  empty_mesh,
  stage_failure,
  scenario_error,
  assertion_failure,
  io_error,
};

struct Error : std::runtime_error {
  Errc code;
  Error(Errc c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

// ---------------------------------------------------------------------------
// Vec3

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double px, double py, double pz) : x(px), y(py), z(pz) {}

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
  constexpr bool operator==(const Vec3&) const = default;

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline constexpr double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(norm2(v)); }

inline Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  if (n < 1e-300) throw Error(Errc::invalid_argument, "cannot normalize zero vector");
  return v / n;
}

inline Vec3 componentwise_min(const Vec3& a, const Vec3& b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}

inline Vec3 componentwise_max(const Vec3& a, const Vec3& b) {
  return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

// Angle between two nonzero vectors, in radians. Uses atan2 for stability
// near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(norm(cross(a, b)), dot(a, b));
}

// ---------------------------------------------------------------------------
// UnitQuat

struct UnitQuat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  constexpr UnitQuat() = default;
  constexpr UnitQuat(double pw, double px, double py, double pz)
      : w(pw), x(px), y(py), z(pz) {}

  static UnitQuat identity() { return {}; }

  static UnitQuat from_axis_angle(const Vec3& axis, double angle_rad) {
    const Vec3 a = normalized(axis);
    const double h = 0.5 * angle_rad;
    const double s = std::sin(h);
    return {std::cos(h), a.x * s, a.y * s, a.z * s};
  }

  UnitQuat conjugate() const { return {w, -x, -y, -z}; }

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  UnitQuat normalized() const {
    const double n = norm();
    if (n < 1e-300) throw Error(Errc::invalid_argument, "cannot normalize zero quaternion");
    return {w / n, x / n, y / n, z / n};
  }

  // Hamilton product.
  UnitQuat operator*(const UnitQuat& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z,
            w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w};
  }

  Vec3 rotate(const Vec3& v) const {
    // v' = q v q*, expanded via the double-cross identity.
    const Vec3 u{x, y, z};
    const Vec3 t = cross(u, v) * 2.0;
    return v + t * w + cross(u, t);
  }

  constexpr bool operator==(const UnitQuat&) const = default;
};

// Smallest rotation angle taking a to b, in radians.
inline double quat_angle(const UnitQuat& a, const UnitQuat& b) {
  const double d = std::abs(a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z);
  return 2.0 * std::acos(std::min(1.0, d));
}

// ---------------------------------------------------------------------------
// SimTransform: rigid motion plus uniform scale. Applies as
// p' = scale * (rotation * p) + translation.

struct SimTransform {
  UnitQuat rotation;
  Vec3 translation;
  double scale = 1.0;

  static SimTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation.rotate(p) * scale + translation; }

  // Composition: (a * b).apply(p) == a.apply(b.apply(p)).
  SimTransform operator*(const SimTransform& o) const {
    return {rotation * o.rotation, apply(o.translation), scale * o.scale};
  }

  SimTransform inverse() const {
    if (scale <= 0.0) throw Error(Errc::invalid_argument, "non-positive transform scale");
    const UnitQuat rinv = rotation.conjugate();
    return {rinv, rinv.rotate(-translation) / scale, 1.0 / scale};
  }

  constexpr bool operator==(const SimTransform&) const = default;
};

// Max positional discrepancy of two transforms over a unit-ball probe set.
inline double transform_distance(const SimTransform& a, const SimTransform& b) {
  static const Vec3 probes[4] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  double worst = 0.0;
  for (const Vec3& p : probes) worst = std::max(worst, norm(a.apply(p) - b.apply(p)));
  return worst;
}

// ---------------------------------------------------------------------------
// Small dense symmetric eigen solve (cyclic Jacobi). Used by the anchor
// alignment closed form (4x4) and plane fitting (3x3).

template <int N>
struct SymEigen {
  std::array<double, N> values{};                 // ascending
  std::array<std::array<double, N>, N> vectors{}; // vectors[k] pairs with values[k]
};

template <int N>
SymEigen<N> jacobi_eigen(std::array<std::array<double, N>, N> a) {
  std::array<std::array<double, N>, N> v{};
  for (int i = 0; i < N; ++i) v[i][i] = 1.0;

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < N; ++p)
      for (int q = p + 1; q < N; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;

    for (int p = 0; p < N; ++p) {
      for (int q = p + 1; q < N; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < N; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < N; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < N; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::array<int, N> order{};
  for (int i = 0; i < N; ++i) order[i] = i;
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j)
      if (a[order[j]][order[j]] < a[order[i]][order[i]]) std::swap(order[i], order[j]);

  SymEigen<N> out;
  for (int i = 0; i < N; ++i) {
    const int k = order[i];
    out.values[i] = a[k][k];
    // Deterministic sign: largest-magnitude component positive.
    int big = 0;
    for (int r = 1; r < N; ++r)
      if (std::abs(v[r][k]) > std::abs(v[big][k])) big = r;
    const double sign = v[big][k] < 0 ? -1.0 : 1.0;
    for (int r = 0; r < N; ++r) out.vectors[i][r] = v[r][k] * sign;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 output is pinned by the standard; the
// distribution helpers below avoid std::uniform_* whose sequences are
// implementation-defined.

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t u64() { return eng_(); }

  // [0, 1)
  double real() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double range(double lo, double hi) { return lo + (hi - lo) * real(); }

  size_t index(size_t n) { return static_cast<size_t>(eng_() % n); }

  Vec3 unit_vec() {
    const double z = range(-1.0, 1.0);
    const double phi = range(0.0, 2.0 * kPi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
  }

  UnitQuat unit_quat() {
    const Vec3 axis = unit_vec();
    return UnitQuat::from_axis_angle(axis, range(0.0, 2.0 * kPi));
  }

 private:
  std::mt19937_64 eng_;
};

// splitmix64, for deriving independent stream seeds from one master seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// FNV-1a 64-bit, used for content hashes in state dumps and caches.
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace nexus
