#pragma once

// Skeleton frames, joint selection and yaw alignment.
//
// Coordinates follow the Kinect V2 camera space: meters, y vertical. A body
// facing the sensor has its right shoulder at larger x than its left shoulder.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bodystate/errors.hpp"

namespace bodystate {

using Joint3D = Eigen::Vector3d;

/// Kinect V2 body joint enumeration (JointType order of the SDK).
enum class JointId : std::size_t {
  SpineBase = 0,
  SpineMid = 1,
  Neck = 2,
  Head = 3,
  ShoulderLeft = 4,
  ElbowLeft = 5,
  WristLeft = 6,
  HandLeft = 7,
  ShoulderRight = 8,
  ElbowRight = 9,
  WristRight = 10,
  HandRight = 11,
  HipLeft = 12,
  KneeLeft = 13,
  AnkleLeft = 14,
  FootLeft = 15,
  HipRight = 16,
  KneeRight = 17,
  AnkleRight = 18,
  FootRight = 19,
  SpineShoulder = 20,
  HandTipLeft = 21,
  ThumbLeft = 22,
  HandTipRight = 23,
  ThumbRight = 24,
};

inline constexpr std::size_t kNumJoints = 25;
inline constexpr std::size_t kNumFeatureJoints = 9;
inline constexpr std::size_t kFeatureDim = kNumFeatureJoints * 3;

inline constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "SpineBase",     "SpineMid",   "Neck",         "Head",       "ShoulderLeft",
    "ElbowLeft",     "WristLeft",  "HandLeft",     "ShoulderRight", "ElbowRight",
    "WristRight",    "HandRight",  "HipLeft",      "KneeLeft",   "AnkleLeft",
    "FootLeft",      "HipRight",   "KneeRight",    "AnkleRight", "FootRight",
    "SpineShoulder", "HandTipLeft", "ThumbLeft",   "HandTipRight", "ThumbRight",
};

/// Joints that make up the feature vector, in vector order.
inline constexpr std::array<JointId, kNumFeatureJoints> kFeatureJoints = {
    JointId::AnkleRight, JointId::AnkleLeft, JointId::KneeRight,
    JointId::KneeLeft,   JointId::WristRight, JointId::WristLeft,
    JointId::Head,       JointId::SpineMid,  JointId::SpineShoulder,
};

inline constexpr std::size_t index_of(JointId id) { return static_cast<std::size_t>(id); }

inline std::optional<JointId> joint_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    if (kJointNames[i] == name) return static_cast<JointId>(i);
  }
  return std::nullopt;
}

/// One skeleton sample. `joints` must hold exactly kNumJoints entries.
struct RawFrame {
  double timestamp = 0.0;
  std::vector<Joint3D> joints;

  const Joint3D& operator[](JointId id) const { return joints.at(index_of(id)); }
  Joint3D& operator[](JointId id) { return joints.at(index_of(id)); }
};

inline void validate_frame(const RawFrame& frame) {
  if (frame.joints.size() != kNumJoints) {
    throw InputError("frame has " + std::to_string(frame.joints.size()) + " joints, expected " +
                     std::to_string(kNumJoints));
  }
  if (!std::isfinite(frame.timestamp)) throw InputError("frame timestamp is not finite");
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    if (!frame.joints[i].allFinite()) {
      throw InputError("joint " + std::string(kJointNames[i]) + " has non-finite coordinates");
    }
  }
}

struct SelectedJoints {
  std::array<Joint3D, kNumFeatureJoints> feature_joints;
  Joint3D hip;
  Joint3D left_shoulder;
  Joint3D right_shoulder;
};

/// Feature joints in the aligned body frame. The aligned shoulders are kept so
/// that an aligned pose can be fed back through `align`.
struct AlignedPose {
  std::array<Joint3D, kNumFeatureJoints> feature_joints;
  Joint3D left_shoulder;
  Joint3D right_shoulder;
};

using RawFeatureVector = Eigen::Matrix<double, static_cast<int>(kFeatureDim), 1>;

inline SelectedJoints select_joints(const RawFrame& frame) {
  validate_frame(frame);
  SelectedJoints sel;
  for (std::size_t i = 0; i < kNumFeatureJoints; ++i) sel.feature_joints[i] = frame[kFeatureJoints[i]];
  sel.hip = frame[JointId::SpineBase];
  sel.left_shoulder = frame[JointId::ShoulderLeft];
  sel.right_shoulder = frame[JointId::ShoulderRight];
  return sel;
}

/// Shoulders closer than this in the xz plane make the yaw undefined.
inline constexpr double kShoulderDegeneracyTolerance = 1e-6;

/// Cancels translation (hip to origin) and yaw (rotation about y so that the
/// left-to-right shoulder direction projects onto +x).
inline AlignedPose align(const SelectedJoints& sel, std::size_t frame_index = 0) {
  const double dx = sel.right_shoulder.x() - sel.left_shoulder.x();
  const double dz = sel.right_shoulder.z() - sel.left_shoulder.z();
  const double r = std::hypot(dx, dz);
  if (!(r >= kShoulderDegeneracyTolerance)) throw DegenerateAlignmentError(frame_index, r);

  const double c = dx / r;
  const double s = dz / r;
  auto transform = [&](const Joint3D& p) {
    const Joint3D q = p - sel.hip;
    return Joint3D(c * q.x() + s * q.z(), q.y(), -s * q.x() + c * q.z());
  };

  AlignedPose out;
  for (std::size_t i = 0; i < kNumFeatureJoints; ++i) out.feature_joints[i] = transform(sel.feature_joints[i]);
  out.left_shoulder = transform(sel.left_shoulder);
  out.right_shoulder = transform(sel.right_shoulder);
  return out;
}

inline SelectedJoints as_selected(const AlignedPose& pose) {
  return SelectedJoints{pose.feature_joints, Joint3D::Zero(), pose.left_shoulder, pose.right_shoulder};
}

inline RawFeatureVector pose_to_vector(const AlignedPose& pose) {
  RawFeatureVector v;
  for (std::size_t i = 0; i < kNumFeatureJoints; ++i) v.segment<3>(static_cast<Eigen::Index>(3 * i)) = pose.feature_joints[i];
  return v;
}

/// Convenience for the full per-frame chain select -> align -> flatten.
inline RawFeatureVector frame_to_vector(const RawFrame& frame, std::size_t frame_index = 0) {
  return pose_to_vector(align(select_joints(frame), frame_index));
}

}  // namespace bodystate
