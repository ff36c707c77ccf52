#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "bodystate/synthetic.hpp"
#include "oracles.hpp"

using namespace bodystate;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  std::random_device rd;
  const fs::path p = fs::temp_directory_path() / ("bodystate_syn_" + tag + std::to_string(rd()));
  fs::remove_all(p);
  return p;
}

RawFrame frame_of(const SkeletonPose& pose) {
  RawFrame f;
  f.joints.assign(pose.begin(), pose.end());
  return f;
}

}  // namespace

TEST(Synthetic, DefaultConfigIsValid) {
  const SyntheticConfig c = default_synthetic_config();
  EXPECT_NO_THROW(validate_synthetic_config(c));
  ASSERT_EQ(c.poses.size(), 8u);
  ASSERT_EQ(c.scripts.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(c.poses[i].name, default_state_names()[i]);
    EXPECT_EQ(c.scripts[i].name, default_action_names()[i]);
  }
}

TEST(Synthetic, CanonicalPosesHaveExpectedGeometry) {
  const SyntheticConfig c = default_synthetic_config();
  const auto& stand = c.poses[0].joints;
  EXPECT_NEAR(stand[index_of(JointId::SpineBase)].norm(), 0.0, 1e-12);
  EXPECT_GT(stand[index_of(JointId::Head)].y(), 0.6);
  EXPECT_LT(stand[index_of(JointId::AnkleLeft)].y(), -0.7);
  for (std::size_t s : {2u, 3u, 4u}) {
    for (std::size_t j = 0; j < kNumJoints; ++j) EXPECT_LE(std::abs(c.poses[s].joints[j].y()), 0.2 + 1e-12);
  }
  for (const auto& pose : c.poses) {
    EXPECT_GT(pose.joints[index_of(JointId::ShoulderRight)].x(), pose.joints[index_of(JointId::ShoulderLeft)].x());
  }
}

TEST(Synthetic, NoiselessFramesAlignToCanonicalPose) {
  SyntheticConfig c = default_synthetic_config();
  c.noise_std = 0.0;
  c.scale_jitter = 0.0;
  c.joint_offset_jitter = 0.0;
  for (std::size_t a = 0; a < c.scripts.size(); ++a) {
    if (c.scripts[a].swing_amplitude > 0) continue;
    const GeneratedRecording rec = generate_recording(c, 3, a, 1);
    for (std::size_t f = 0; f < rec.frames.size(); f += 7) {
      const AlignedPose got = align(select_joints(rec.frames[f]));
      const AlignedPose want = align(select_joints(frame_of(c.poses[rec.states[f]].joints)));
      EXPECT_LE(oracle::max_abs_diff(got, want), 1e-9) << c.scripts[a].name << " frame " << f;
    }
  }
}

TEST(Synthetic, StatesFollowScriptOrder) {
  const SyntheticConfig c = default_synthetic_config();
  for (std::size_t a = 0; a < c.scripts.size(); ++a) {
    const GeneratedRecording rec = generate_recording(c, 0, a, 0);
    ASSERT_EQ(rec.frames.size(), rec.states.size());
    std::vector<std::size_t> runs;
    for (std::size_t s : rec.states) {
      if (runs.empty() || runs.back() != s) runs.push_back(s);
    }
    std::vector<std::size_t> script;
    for (const auto& step : c.scripts[a].steps) {
      if (script.empty() || script.back() != step.state) script.push_back(step.state);
    }
    EXPECT_EQ(runs, script) << c.scripts[a].name;
  }
}

TEST(Synthetic, RecordingsAreDeterministicAndSeedDependent) {
  SyntheticConfig c = default_synthetic_config();
  const GeneratedRecording a = generate_recording(c, 2, 4, 1);
  const GeneratedRecording b = generate_recording(c, 2, 4, 1);
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (std::size_t f = 0; f < a.frames.size(); ++f) EXPECT_EQ(a.frames[f].joints, b.frames[f].joints);
  c.seed = 8;
  const GeneratedRecording d = generate_recording(c, 2, 4, 1);
  EXPECT_NE(d.frames[0].joints[0], a.frames[0].joints[0]);
}

TEST(Synthetic, DatasetLayoutAndByteIdenticalReruns) {
  SyntheticConfig c = default_synthetic_config();
  const fs::path a = fresh_dir("a");
  const fs::path b = fresh_dir("b");
  const DatasetManifest m = generate_synthetic_dataset(c, a);
  generate_synthetic_dataset(c, b);
  EXPECT_EQ(m.recordings.size(), 11u * 8u * 3u);
  EXPECT_EQ(m.subjects.size(), 11u);
  EXPECT_TRUE(fs::is_regular_file(a / "s01" / "sit_r0.seq"));
  EXPECT_TRUE(fs::is_regular_file(a / "s11" / "end_up_sit_r2.ann"));

  const DatasetManifest loaded = load_manifest(a / "manifest.json");
  EXPECT_EQ(loaded.recordings.size(), m.recordings.size());
  std::set<std::string> ids;
  for (const auto& r : loaded.recordings) ids.insert(r.id(loaded.action_names));
  EXPECT_EQ(ids.size(), m.recordings.size());

  EXPECT_EQ(detail::read_file(a / "manifest.json"), detail::read_file(b / "manifest.json"));
  for (const auto& r : m.recordings) {
    const fs::path rel = r.sequence_path.lexically_relative(a);
    ASSERT_EQ(detail::read_file(a / rel), detail::read_file(b / rel)) << rel;
    const fs::path ann = r.annotation_path->lexically_relative(a);
    ASSERT_EQ(detail::read_file(a / ann), detail::read_file(b / ann)) << ann;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Synthetic, ValidationRejectsBadConfigs) {
  SyntheticConfig c = default_synthetic_config();
  c.n_subjects = 0;
  EXPECT_THROW(validate_synthetic_config(c), ConfigError);
  c = default_synthetic_config();
  c.noise_std = -0.1;
  EXPECT_THROW(validate_synthetic_config(c), ConfigError);
  c = default_synthetic_config();
  c.scripts[0].steps[0].max_frames = 0;
  EXPECT_THROW(validate_synthetic_config(c), ConfigError);
  c = default_synthetic_config();
  c.poses[1].joints[index_of(JointId::ShoulderRight)] = c.poses[1].joints[index_of(JointId::ShoulderLeft)];
  EXPECT_THROW(validate_synthetic_config(c), ConfigError);
  c = default_synthetic_config();
  c.scripts[2].steps[0].state = 99;
  EXPECT_THROW(validate_synthetic_config(c), ConfigError);
}
