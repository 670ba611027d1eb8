#pragma once

// Dual-lens equidistant fisheye model for a back-to-back 360 camera:
// image radius r = focal * theta, theta measured from the lens forward axis.

#include "nexus/core.hpp"

namespace nexus {

struct Pixel {
  double u = 0.0, v = 0.0;
  constexpr bool operator==(const Pixel&) const = default;
};

struct FisheyeModel {
  double image_size = 0.0;      // square, pixels
  Pixel principal_point;        // pixels
  double focal = 0.0;           // pixels per radian
  std::array<UnitQuat, 2> lens_orientation;  // local +Z is the lens forward axis

  Vec3 lens_forward(int lens) const { return lens_orientation[lens].rotate({0, 0, 1}); }
};

// Default configuration: each lens covers exactly one hemisphere
// (focal = image_size / pi), principal point at the image center, lens 0
// looking along +Z and lens 1 along -Z.
inline FisheyeModel make_fisheye_model(double image_size) {
  if (image_size <= 0) throw Error(Errc::invalid_argument, "image_size must be positive");
  FisheyeModel m;
  m.image_size = image_size;
  m.principal_point = {image_size / 2.0, image_size / 2.0};
  m.focal = image_size / kPi;
  m.lens_orientation[0] = UnitQuat::identity();
  m.lens_orientation[1] = UnitQuat::from_axis_angle({0, 1, 0}, kPi);
  return m;
}

inline void validate(const FisheyeModel& m) {
  if (m.focal <= 0) throw Error(Errc::invalid_argument, "focal must be positive");
  if (m.focal * kPi / 2.0 > m.image_size / 2.0 + 1e-9)
    throw Error(Errc::invalid_argument, "hemisphere boundary exceeds image half-size");
}

struct FisheyeProjection {
  int lens = 0;
  Pixel pixel;
};

inline FisheyeProjection fisheye_project(const FisheyeModel& model, const Vec3& dir) {
  if (std::abs(norm(dir) - 1.0) > 1e-9)
    throw Error(Errc::invalid_argument, "direction must be unit length");

  const double d0 = dot(dir, model.lens_forward(0));
  const double d1 = dot(dir, model.lens_forward(1));
  const int lens = d0 >= d1 ? 0 : 1;  // tie at the seam goes to lens 0

  const Vec3 local = model.lens_orientation[lens].conjugate().rotate(dir);
  const double planar = std::hypot(local.x, local.y);
  const double theta = std::atan2(planar, local.z);
  const double r = model.focal * theta;

  Pixel px = model.principal_point;
  if (planar > 0.0) {
    px.u += r * local.x / planar;
    px.v += r * local.y / planar;
  }
  return {lens, px};
}

inline Vec3 fisheye_unproject(const FisheyeModel& model, int lens, const Pixel& pixel) {
  if (lens != 0 && lens != 1) throw Error(Errc::invalid_argument, "lens index must be 0 or 1");
  const double du = pixel.u - model.principal_point.u;
  const double dv = pixel.v - model.principal_point.v;
  const double r = std::hypot(du, dv);
  if (r > model.focal * kPi / 2.0 + 1.0)
    throw Error(Errc::out_of_lens_field, "pixel radius beyond lens field");

  const double theta = r / model.focal;
  Vec3 local{0, 0, 1};
  if (r > 0.0) {
    const double s = std::sin(theta);
    local = {s * du / r, s * dv / r, std::cos(theta)};
  }
  return model.lens_orientation[lens].rotate(local);
}

}  // namespace nexus
