#pragma once

// Synthetic skeleton recordings with ground-truth body states.
//
// Every action is a script of body states with random dwell times. Each frame is
// the canonical pose of its state, distorted by a per-subject scale and joint
// offsets, per-frame Gaussian joint noise, and a per-subject yaw and
// translation that alignment has to undo.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "bodystate/data_io.hpp"
#include "bodystate/detail/random.hpp"
#include "bodystate/errors.hpp"
#include "bodystate/hmm.hpp"
#include "bodystate/lda.hpp"
#include "bodystate/skeleton.hpp"

namespace bodystate {

using SkeletonPose = std::array<Joint3D, kNumJoints>;

struct StatePose {
  std::string name;
  SkeletonPose joints;  // hip at origin, right shoulder at +x, shoulders level in z
  double noise_scale = 1.0;
};

struct ScriptStep {
  std::size_t state = 0;
  std::size_t min_frames = 1;
  std::size_t max_frames = 1;
};

struct ActionScript {
  std::string name;
  std::vector<ScriptStep> steps;
  /// Peak forward/backward swing of wrists and ankles (m) while standing, for gait.
  double swing_amplitude = 0.0;
};

struct SyntheticConfig {
  std::size_t n_subjects = 11;
  std::size_t repetitions = 3;
  double scale_jitter = 0.08;        // subject scale uniform in [1 - j, 1 + j]
  double joint_offset_jitter = 0.02;  // per subject, per joint, per axis uniform in [-j, j] (m)
  double noise_std = 0.015;           // per-frame joint noise (m), times the state's noise_scale
  double max_translation = 1.0;       // subject x offset uniform in [-t, t]; depth in [1.5, 1.5 + 2t]
  bool random_yaw = true;
  double fps = 30.0;
  std::vector<StatePose> poses;
  std::vector<ActionScript> scripts;
  std::uint64_t seed = 7;
};

namespace detail {

struct KeyJoints {
  Joint3D spine_mid, spine_shoulder, head;
  Joint3D shoulder_l, shoulder_r, wrist_l, wrist_r;
  Joint3D knee_l, knee_r, ankle_l, ankle_r;
};

/// Fills the remaining Kinect joints from the hand-authored key joints.
inline SkeletonPose build_pose(const KeyJoints& k) {
  SkeletonPose p;
  auto set = [&](JointId id, const Joint3D& v) { p[index_of(id)] = v; };
  const Joint3D hip = Joint3D::Zero();
  const Joint3D lateral = 0.25 * (k.shoulder_l - k.shoulder_r);  // toward the left side
  set(JointId::SpineBase, hip);
  set(JointId::SpineMid, k.spine_mid);
  set(JointId::SpineShoulder, k.spine_shoulder);
  set(JointId::Neck, k.spine_shoulder + 0.45 * (k.head - k.spine_shoulder));
  set(JointId::Head, k.head);
  set(JointId::ShoulderLeft, k.shoulder_l);
  set(JointId::ShoulderRight, k.shoulder_r);
  set(JointId::ElbowLeft, 0.5 * (k.shoulder_l + k.wrist_l) + 0.3 * lateral);
  set(JointId::ElbowRight, 0.5 * (k.shoulder_r + k.wrist_r) - 0.3 * lateral);
  set(JointId::WristLeft, k.wrist_l);
  set(JointId::WristRight, k.wrist_r);
  const Joint3D forearm_l = k.wrist_l - p[index_of(JointId::ElbowLeft)];
  const Joint3D forearm_r = k.wrist_r - p[index_of(JointId::ElbowRight)];
  set(JointId::HandLeft, k.wrist_l + 0.3 * forearm_l);
  set(JointId::HandRight, k.wrist_r + 0.3 * forearm_r);
  set(JointId::HandTipLeft, k.wrist_l + 0.55 * forearm_l);
  set(JointId::HandTipRight, k.wrist_r + 0.55 * forearm_r);
  set(JointId::ThumbLeft, k.wrist_l + 0.35 * forearm_l - 0.1 * lateral);
  set(JointId::ThumbRight, k.wrist_r + 0.35 * forearm_r + 0.1 * lateral);
  set(JointId::HipLeft, hip + lateral);
  set(JointId::HipRight, hip - lateral);
  set(JointId::KneeLeft, k.knee_l);
  set(JointId::KneeRight, k.knee_r);
  set(JointId::AnkleLeft, k.ankle_l);
  set(JointId::AnkleRight, k.ankle_r);
  const Joint3D shin_l = k.ankle_l - k.knee_l;
  const Joint3D shin_r = k.ankle_r - k.knee_r;
  set(JointId::FootLeft, k.ankle_l + 0.15 * shin_l + Joint3D(0, 0, -0.08));
  set(JointId::FootRight, k.ankle_r + 0.15 * shin_r + Joint3D(0, 0, -0.08));
  return p;
}

inline Joint3D j3(double x, double y, double z) { return Joint3D(x, y, z); }

}  // namespace detail

/// Hand-authored poses for the eight default body states, in default_state_names() order.
inline std::vector<StatePose> default_state_poses() {
  using detail::j3;
  std::vector<StatePose> poses;
  auto add = [&](const std::string& name, const detail::KeyJoints& k, double noise) {
    poses.push_back({name, detail::build_pose(k), noise});
  };
  // Head about 0.75 m above the hip when standing, so roughly 1.7 m above the floor.
  add("stand",
      {j3(0, 0.30, 0), j3(0, 0.55, 0), j3(0, 0.75, 0), j3(-0.18, 0.52, 0), j3(0.18, 0.52, 0),
       j3(-0.24, 0.02, 0), j3(0.24, 0.02, 0), j3(-0.10, -0.47, 0), j3(0.10, -0.47, 0), j3(-0.10, -0.88, 0.02),
       j3(0.10, -0.88, 0.02)},
      1.0);
  add("crouching",
      {j3(0, 0.28, -0.08), j3(0, 0.50, -0.18), j3(0, 0.66, -0.28), j3(-0.18, 0.48, -0.16), j3(0.18, 0.48, -0.16),
       j3(-0.20, 0.05, -0.38), j3(0.20, 0.05, -0.38), j3(-0.12, 0.05, -0.35), j3(0.12, 0.05, -0.35),
       j3(-0.12, -0.40, -0.10), j3(0.12, -0.40, -0.10)},
      2.0);
  // Lying states keep every joint within 0.2 m of the hip height.
  add("lay_back",
      {j3(0, 0.05, 0.30), j3(0, 0.08, 0.55), j3(0, 0.10, 0.75), j3(-0.18, 0.07, 0.52), j3(0.18, 0.07, 0.52),
       j3(-0.28, 0.02, 0.05), j3(0.28, 0.02, 0.05), j3(-0.10, 0.05, -0.45), j3(0.10, 0.05, -0.45),
       j3(-0.10, 0.02, -0.88), j3(0.10, 0.02, -0.88)},
      2.5);
  add("lay_front",
      {j3(0, 0.06, -0.30), j3(0, 0.10, -0.55), j3(0, 0.12, -0.75), j3(-0.18, 0.09, -0.52),
       j3(0.18, 0.09, -0.52), j3(-0.25, 0.03, -0.70), j3(0.25, 0.03, -0.70), j3(-0.10, 0.03, 0.45),
       j3(0.10, 0.03, 0.45), j3(-0.10, 0.10, 0.85), j3(0.10, 0.10, 0.85)},
      2.5);
  add("lay_side",
      {j3(0, 0.10, 0.28), j3(0.02, 0.15, 0.50), j3(0.05, 0.15, 0.72), j3(-0.14, 0.02, 0.50), j3(0.14, 0.18, 0.50),
       j3(-0.25, 0.02, 0.35), j3(0.05, 0.19, 0.20), j3(-0.15, 0.05, -0.25), j3(-0.12, 0.18, -0.30),
       j3(0.0, 0.03, -0.55), j3(0.02, 0.17, -0.60)},
      2.5);
  add("bend",
      {j3(0, 0.18, -0.22), j3(0, 0.28, -0.48), j3(0, 0.25, -0.68), j3(-0.18, 0.28, -0.45), j3(0.18, 0.28, -0.45),
       j3(-0.20, -0.30, -0.50), j3(0.20, -0.30, -0.50), j3(-0.10, -0.47, 0.02), j3(0.10, -0.47, 0.02),
       j3(-0.10, -0.88, 0.04), j3(0.10, -0.88, 0.04)},
      2.0);
  add("sit_on_chair",
      {j3(0, 0.30, 0.02), j3(0, 0.55, 0.03), j3(0, 0.75, 0.0), j3(-0.18, 0.52, 0.03), j3(0.18, 0.52, 0.03),
       j3(-0.20, 0.05, -0.25), j3(0.20, 0.05, -0.25), j3(-0.12, 0.0, -0.42), j3(0.12, 0.0, -0.42),
       j3(-0.12, -0.45, -0.45), j3(0.12, -0.45, -0.45)},
      1.0);
  add("sit_on_ground",
      {j3(0, 0.29, 0.04), j3(0, 0.53, 0.06), j3(0, 0.72, 0.05), j3(-0.18, 0.50, 0.06), j3(0.18, 0.50, 0.06),
       j3(-0.28, 0.0, 0.05), j3(0.28, 0.0, 0.05), j3(-0.12, 0.05, -0.45), j3(0.12, 0.05, -0.45),
       j3(-0.12, -0.05, -0.85), j3(0.12, -0.05, -0.85)},
      1.5);
  return poses;
}

/// State scripts for the eight default actions, in default_action_names() order.
/// Dwell times are in frames at 30 fps.
inline std::vector<ActionScript> default_action_scripts() {
  enum : std::size_t { Stand, Crouching, LayBack, LayFront, LaySide, Bend, SitChair, SitGround };
  return {
      {"sit", {{Stand, 25, 45}, {SitChair, 45, 90}}, 0.0},
      {"grasp", {{Stand, 20, 40}, {Bend, 20, 40}, {Stand, 20, 40}}, 0.0},
      {"walk", {{Stand, 90, 150}}, 0.10},
      {"lay", {{Stand, 15, 30}, {Crouching, 15, 30}, {SitGround, 15, 30}, {LayBack, 40, 70}}, 0.0},
      {"fall_front", {{Stand, 20, 40}, {LayFront, 40, 80}}, 0.0},
      {"fall_back", {{Stand, 20, 40}, {LayBack, 40, 80}}, 0.0},
      {"fall_side", {{Stand, 20, 40}, {LaySide, 40, 80}}, 0.0},
      {"end_up_sit", {{Stand, 20, 40}, {SitGround, 40, 80}}, 0.0},
  };
}

inline SyntheticConfig default_synthetic_config() {
  SyntheticConfig config;
  config.poses = default_state_poses();
  config.scripts = default_action_scripts();
  return config;
}

inline void validate_synthetic_config(const SyntheticConfig& c) {
  if (c.n_subjects == 0) throw ConfigError("n_subjects must be >= 1");
  if (c.repetitions == 0) throw ConfigError("repetitions must be >= 1");
  if (!(c.noise_std >= 0) || !(c.scale_jitter >= 0) || c.scale_jitter >= 1 || !(c.joint_offset_jitter >= 0) ||
      !(c.max_translation >= 0)) {
    throw ConfigError("noise and jitter parameters must be non-negative (scale jitter < 1)");
  }
  if (!(c.fps > 0)) throw ConfigError("fps must be positive");
  if (c.poses.size() < 2) throw ConfigError("pose table needs at least two states");
  if (c.scripts.empty()) throw ConfigError("no action scripts");
  for (const auto& pose : c.poses) {
    if (!(pose.noise_scale >= 0)) throw ConfigError("pose noise scale must be non-negative");
    const Joint3D& l = pose.joints[index_of(JointId::ShoulderLeft)];
    const Joint3D& r = pose.joints[index_of(JointId::ShoulderRight)];
    if (std::hypot(r.x() - l.x(), r.z() - l.z()) < 0.25) {
      throw ConfigError("pose '" + pose.name + "' has shoulders closer than 0.25 m in the xz plane");
    }
  }
  for (const auto& script : c.scripts) {
    if (script.steps.empty()) throw ConfigError("script '" + script.name + "' is empty");
    for (const auto& step : script.steps) {
      if (step.state >= c.poses.size()) throw ConfigError("script '" + script.name + "' references unknown state");
      if (step.min_frames == 0 || step.max_frames < step.min_frames) {
        throw ConfigError("script '" + script.name + "' has an invalid dwell range");
      }
    }
  }
}

struct SubjectProfile {
  double scale = 1.0;
  std::array<Joint3D, kNumJoints> offsets{};
  double yaw = 0.0;
  Joint3D translation = Joint3D::Zero();
};

struct GeneratedRecording {
  std::vector<RawFrame> frames;
  std::vector<std::size_t> states;  // ground truth, one per frame
};

inline std::string subject_id(std::size_t subject) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%02zu", subject + 1);
  return buf;
}

inline SubjectProfile make_subject(const SyntheticConfig& c, std::size_t subject) {
  detail::Rng rng(detail::derive_seed(c.seed, {1, subject}));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  SubjectProfile s;
  s.scale = 1.0 + c.scale_jitter * unit(rng);
  for (auto& o : s.offsets) o = Joint3D(unit(rng), unit(rng), unit(rng)) * c.joint_offset_jitter;
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  s.yaw = c.random_yaw ? angle(rng) : 0.0;
  s.translation = Joint3D(c.max_translation * unit(rng), 0.9 + 0.1 * unit(rng),
                          1.5 + c.max_translation * (1.0 + unit(rng)));
  return s;
}

inline GeneratedRecording generate_recording(const SyntheticConfig& c, std::size_t subject, std::size_t action,
                                             std::size_t repetition) {
  const SubjectProfile profile = make_subject(c, subject);
  const ActionScript& script = c.scripts.at(action);
  detail::Rng rng(detail::derive_seed(c.seed, {2, subject, action, repetition}));
  std::normal_distribution<double> gauss(0.0, 1.0);

  GeneratedRecording rec;
  for (const ScriptStep& step : script.steps) {
    std::uniform_int_distribution<std::size_t> dwell(step.min_frames, step.max_frames);
    rec.states.insert(rec.states.end(), dwell(rng), step.state);
  }

  const double cy = std::cos(profile.yaw);
  const double sy = std::sin(profile.yaw);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  const double phase = phase_dist(rng);
  for (std::size_t f = 0; f < rec.states.size(); ++f) {
    const StatePose& pose = c.poses[rec.states[f]];
    const double sigma = c.noise_std * pose.noise_scale;
    SkeletonPose joints = pose.joints;
    if (script.swing_amplitude > 0) {
      const double swing = script.swing_amplitude * std::sin(phase + 2.0 * std::numbers::pi * static_cast<double>(f) / c.fps);
      joints[index_of(JointId::AnkleLeft)].z() += swing;
      joints[index_of(JointId::AnkleRight)].z() -= swing;
      joints[index_of(JointId::WristLeft)].z() -= swing;
      joints[index_of(JointId::WristRight)].z() += swing;
    }
    RawFrame frame;
    frame.timestamp = static_cast<double>(f) / c.fps;
    frame.joints.resize(kNumJoints);
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      Joint3D p = joints[j] * profile.scale + profile.offsets[j];
      if (sigma > 0) p += Joint3D(gauss(rng), gauss(rng), gauss(rng)) * sigma;
      // Rotation about y by the subject yaw, then translation.
      frame.joints[j] = Joint3D(cy * p.x() + sy * p.z(), p.y(), -sy * p.x() + cy * p.z()) + profile.translation;
    }
    rec.frames.push_back(std::move(frame));
  }
  return rec;
}

/// Writes <out>/<subject>/<action>_r<rep>.{seq,ann} plus <out>/manifest.json.
inline DatasetManifest generate_synthetic_dataset(const SyntheticConfig& c, const fs::path& out_dir) {
  validate_synthetic_config(c);
  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  for (const auto& p : c.poses) manifest.state_names.push_back(p.name);
  for (const auto& s : c.scripts) manifest.action_names.push_back(s.name);
  manifest.metadata = {{"generator", "bodystate-synthetic"},
                       {"seed", c.seed},
                       {"n_subjects", c.n_subjects},
                       {"repetitions", c.repetitions},
                       {"noise_std", c.noise_std},
                       {"scale_jitter", c.scale_jitter},
                       {"joint_offset_jitter", c.joint_offset_jitter},
                       {"fps", c.fps}};
  for (std::size_t s = 0; s < c.n_subjects; ++s) {
    const std::string sid = subject_id(s);
    manifest.subjects.push_back(sid);
    for (std::size_t a = 0; a < c.scripts.size(); ++a) {
      for (std::size_t r = 0; r < c.repetitions; ++r) {
        const GeneratedRecording rec = generate_recording(c, s, a, r);
        const std::string stem = c.scripts[a].name + "_r" + std::to_string(r);
        Recording entry;
        entry.subject = sid;
        entry.action = a;
        entry.repetition = r;
        entry.sequence_path = out_dir / sid / (stem + ".seq");
        entry.annotation_path = out_dir / sid / (stem + ".ann");
        save_sequence(entry.sequence_path, rec.frames, c.fps);
        save_annotations(*entry.annotation_path, rec.states, manifest.state_names);
        manifest.recordings.push_back(std::move(entry));
      }
    }
  }
  save_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace bodystate
