#pragma once

// Stereo rig and the monocular rendering adjustment: the right-eye camera is
// moved onto the left eye (for a standard rig this equals shifting it by
// -ipd along the rig's local right axis), so binocular content matches the
// depth cues of a monocular 360 video.

#include "nexus/core.hpp"

namespace nexus {

struct StereoRig {
  SimTransform left_eye_pose;
  SimTransform right_eye_pose;
  double ipd = 0.064;  // meters

  Vec3 right_axis() const { return right_eye_pose.rotation.rotate({1, 0, 0}); }
};

inline StereoRig apply_monocular(const StereoRig& rig) {
  if (rig.ipd <= 0) throw Error(Errc::invalid_argument, "ipd must be positive");
  StereoRig out = rig;
  out.right_eye_pose.translation = rig.left_eye_pose.translation;
  return out;
}

}  // namespace nexus
