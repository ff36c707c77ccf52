#include <gtest/gtest.h>

#include <random>
#include <set>

#include "bodystate/evaluation.hpp"
#include "bodystate/synthetic.hpp"

using namespace bodystate;

namespace {

DatasetManifest names_only(std::vector<std::string> subjects, std::vector<std::pair<std::string, std::size_t>> recs) {
  DatasetManifest m;
  m.state_names = default_state_names();
  m.action_names = default_action_names();
  m.subjects = std::move(subjects);
  std::size_t rep = 0;
  for (auto& [s, a] : recs) m.recordings.push_back({s, a, rep++, "unused.seq", std::nullopt});
  return m;
}

/// Synthetic recordings reduced in memory, without touching the filesystem.
LoadedDataset synthetic_dataset(std::size_t subjects, std::size_t reps) {
  SyntheticConfig c = default_synthetic_config();
  LoadedDataset data;
  data.manifest.state_names = default_state_names();
  data.manifest.action_names = default_action_names();
  for (std::size_t s = 0; s < subjects; ++s) {
    data.manifest.subjects.push_back(subject_id(s));
    for (std::size_t a = 0; a < c.scripts.size(); ++a) {
      for (std::size_t r = 0; r < reps; ++r) {
        const GeneratedRecording g = generate_recording(c, s, a, r);
        Recording entry{subject_id(s), a, r, "mem", std::filesystem::path("mem")};
        LoadedRecording rec;
        rec.manifest_index = data.manifest.recordings.size();
        rec.id = entry.id(data.manifest.action_names);
        rec.action = a;
        rec.annotated = true;
        for (std::size_t f = 0; f < g.frames.size(); ++f) {
          rec.vectors.push_back(frame_to_vector(g.frames[f], f));
          rec.frame_indices.push_back(f);
          rec.states.push_back(g.states[f]);
        }
        data.manifest.recordings.push_back(entry);
        data.recordings.push_back(std::move(rec));
      }
    }
  }
  return data;
}

/// Three states placed on separate axes with tiny spread.
LoadedDataset separated_states() {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 0.01);
  LoadedDataset data;
  data.manifest.state_names = {"stand", "sit_on_chair", "lay_back"};
  data.manifest.action_names = {"sit"};
  data.manifest.subjects = {"s01", "s02", "s03"};
  for (std::size_t s = 0; s < 3; ++s) {
    Recording entry{data.manifest.subjects[s], 0, 0, "mem", std::filesystem::path("mem")};
    LoadedRecording rec;
    rec.id = entry.id(data.manifest.action_names);
    rec.annotated = true;
    for (std::size_t f = 0; f < 60; ++f) {
      const std::size_t state = f % 3;
      RawFeatureVector v;
      for (Eigen::Index a = 0; a < 27; ++a) v[a] = g(rng);
      v[static_cast<Eigen::Index>(state)] += 1.0;
      rec.vectors.push_back(v);
      rec.frame_indices.push_back(f);
      rec.states.push_back(state);
    }
    data.manifest.recordings.push_back(entry);
    data.recordings.push_back(std::move(rec));
  }
  return data;
}

}  // namespace

TEST(Evaluation, TwoSubjectsGiveTwoDisjointFolds) {
  const DatasetManifest m = names_only({"s01", "s02"}, {{"s01", 0}, {"s02", 0}, {"s01", 1}, {"s02", 2}});
  const std::vector<Fold> folds = loso_folds(m);
  ASSERT_EQ(folds.size(), 2u);
  for (const Fold& f : folds) {
    std::set<std::size_t> train(f.train.begin(), f.train.end());
    for (std::size_t t : f.test) {
      EXPECT_EQ(train.count(t), 0u);
      EXPECT_EQ(m.recordings[t].subject, f.subject);
    }
    EXPECT_EQ(f.train.size() + f.test.size(), m.recordings.size());
  }
  std::multiset<std::size_t> tested;
  for (const Fold& f : folds) tested.insert(f.test.begin(), f.test.end());
  EXPECT_EQ(tested, (std::multiset<std::size_t>{0, 1, 2, 3}));
}

TEST(Evaluation, EmptySubjectWarnsAndSingleSubjectFails) {
  const auto folds = loso_folds(names_only({"s01", "s02", "s03"}, {{"s01", 0}, {"s02", 0}}));
  ASSERT_EQ(folds.size(), 3u);
  EXPECT_TRUE(folds[2].test.empty());
  EXPECT_EQ(folds[2].warnings.size(), 1u);
  EXPECT_THROW(loso_folds(names_only({"s01"}, {{"s01", 0}})), ConfigError);
}

TEST(Evaluation, PerfectlySeparatedStatesScoreFullMarks) {
  const LoadedDataset data = separated_states();
  for (DistanceMetric metric : {DistanceMetric::Euclidean, DistanceMetric::Mahalanobis}) {
    EvaluationConfig cfg;
    cfg.metric = metric;
    const EvaluationReport r = evaluate_states(data, cfg);
    EXPECT_EQ(r.kind, "states");
    EXPECT_EQ(r.confusion.total(), 180);
    EXPECT_DOUBLE_EQ(r.total_accuracy, 1.0);
    for (const auto& acc : r.per_class_accuracy) EXPECT_DOUBLE_EQ(acc.value(), 1.0);
    EXPECT_DOUBLE_EQ(report_to_json(r)["total_accuracy_percent"].get<double>(), 100.0);
  }
}

TEST(Evaluation, BinaryFallMetricsByHand) {
  ConfusionMatrix cm({"walk", "sit", "fall_front", "fall_back"});
  const int rows[4][4] = {{8, 1, 1, 0}, {0, 6, 0, 4}, {0, 1, 7, 2}, {1, 0, 0, 9}};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 4; ++k) cm.add(i, k, rows[i][k]);
  const BinaryFallReport r = binary_fall_metrics(cm, {"fall_front", "fall_back"});
  EXPECT_EQ(r.true_positives, 18);
  EXPECT_EQ(r.false_negatives, 2);
  EXPECT_EQ(r.true_negatives, 15);
  EXPECT_EQ(r.false_positives, 5);
  EXPECT_DOUBLE_EQ(r.recognition_rate, 0.9);
  EXPECT_DOUBLE_EQ(r.specificity_rate, 0.75);
  EXPECT_DOUBLE_EQ(r.false_alarm_rate, 0.25);
  const json j = fall_report_to_json(r);
  EXPECT_DOUBLE_EQ(j["recognition_rate_percent"].get<double>(), 90.0);

  EXPECT_THROW(binary_fall_metrics(cm, {}), ConfigError);
  EXPECT_THROW(binary_fall_metrics(cm, {"walk", "sit", "fall_front", "fall_back"}), ConfigError);
  EXPECT_THROW(binary_fall_metrics(cm, {"fall_down_stairs"}), ConfigError);
}

TEST(Evaluation, CollapseConservesCounts) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> u(0, 20);
  for (int trial = 0; trial < 50; ++trial) {
    ConfusionMatrix cm(default_action_names());
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t k = 0; k < 8; ++k) cm.add(i, k, u(rng));
    const BinaryFallReport r = binary_fall_metrics(cm, default_fall_actions());
    std::int64_t fall_rows = 0;
    for (std::size_t i = 4; i < 8; ++i) fall_rows += cm.row_total(i);
    EXPECT_EQ(r.true_positives + r.false_negatives, fall_rows);
    EXPECT_EQ(r.true_positives + r.false_negatives + r.true_negatives + r.false_positives, cm.total());
    EXPECT_NEAR(r.specificity_rate + r.false_alarm_rate, 1.0, 1e-12);
    EXPECT_GE(r.recognition_rate, 0.0);
    EXPECT_LE(r.recognition_rate, 1.0);
  }
}

TEST(Evaluation, MissingAnnotationsAreListed) {
  LoadedDataset data = separated_states();
  data.recordings[1].annotated = false;
  for (auto& s : data.recordings[1].states) s.reset();
  try {
    evaluate_states(data, EvaluationConfig{});
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("s02/sit/0"), std::string::npos);
  }
  EXPECT_THROW(evaluate_actions(data, EvaluationConfig{}), InputError);
}

TEST(Evaluation, ActionMissingFromTrainingFoldIsNamed) {
  LoadedDataset data = synthetic_dataset(2, 1);
  // Drop s02's recording of "walk": the fold holding out s01 has no walk data.
  for (std::size_t r = 0; r < data.recordings.size(); ++r) {
    if (data.manifest.recordings[r].subject == "s02" && data.recordings[r].action == 2) {
      data.recordings.erase(data.recordings.begin() + static_cast<std::ptrdiff_t>(r));
      data.manifest.recordings.erase(data.manifest.recordings.begin() + static_cast<std::ptrdiff_t>(r));
      break;
    }
  }
  try {
    evaluate_actions(data, EvaluationConfig{});
    FAIL();
  } catch (const TrainingDataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("fold 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'walk'"), std::string::npos) << msg;
  }
}

TEST(Evaluation, ActionEvaluationIsDeterministicAcrossSchedules) {
  const LoadedDataset data = synthetic_dataset(3, 1);
  EvaluationConfig cfg;
  cfg.baum_welch.restarts = 3;
  const EvaluationReport a = evaluate_actions(data, cfg);
  cfg.parallel_folds = false;
  const EvaluationReport b = evaluate_actions(data, cfg);
  EXPECT_EQ(a.confusion.counts, b.confusion.counts);
  ASSERT_EQ(a.outcomes.size(), 24u);
  ASSERT_EQ(b.outcomes.size(), 24u);
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
    EXPECT_EQ(a.outcomes[i].recording, b.outcomes[i].recording);
    EXPECT_EQ(a.outcomes[i].scores, b.outcomes[i].scores);
  }
  EXPECT_EQ(report_to_json(a).dump(), report_to_json(b).dump());
  EXPECT_EQ(a.confusion.total(), 24);
}

TEST(Evaluation, ReportRendering) {
  EXPECT_DOUBLE_EQ(percent2(0.123456), 12.35);
  EXPECT_DOUBLE_EQ(percent2(1.0), 100.0);
  EXPECT_EQ(format_percent(0.5), "50.00%");

  EvaluationReport r;
  r.kind = "actions";
  r.confusion = ConfusionMatrix({"sit", "walk", "lay"});
  r.confusion.add(0, 0, 3);
  r.confusion.add(0, 1, 1);
  r.confusion.add(1, 1, 2);
  finalize_report(r);
  EXPECT_DOUBLE_EQ(*r.per_class_accuracy[0], 0.75);
  EXPECT_FALSE(r.per_class_accuracy[2].has_value());
  EXPECT_DOUBLE_EQ(r.total_accuracy, 5.0 / 6.0);

  const json j = report_to_json(r);
  for (const char* key : {"kind", "config", "labels", "confusion", "per_class_accuracy_percent",
                          "total_accuracy_percent", "evaluated", "warnings"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_TRUE(j["per_class_accuracy_percent"]["lay"].is_null());
  EXPECT_DOUBLE_EQ(j["total_accuracy_percent"].get<double>(), 83.33);
  EXPECT_NE(render_report_table(r).find("75.00%"), std::string::npos);

  const std::string pgm = confusion_to_pgm(r.confusion, 2);
  EXPECT_EQ(pgm.rfind("P5\n6 6\n255\n", 0), 0u);
  EXPECT_EQ(pgm.size(), std::string("P5\n6 6\n255\n").size() + 36);
}

TEST(Evaluation, TrainedBundleRecognizesItsOwnRecordings) {
  const LoadedDataset data = synthetic_dataset(3, 1);
  EvaluationConfig cfg;
  cfg.baum_welch.restarts = 3;
  const ModelBundle bundle = train_model(data, cfg);
  EXPECT_EQ(bundle.fisher.output_dim(), 7);
  EXPECT_EQ(bundle.bank.models.size(), 8u);
  EXPECT_EQ(bundle.config["n_hidden"], 3);
  const SyntheticConfig c = default_synthetic_config();
  for (std::size_t a = 0; a < 8; ++a) {
    StateSequence states;
    const ActionDecision d = recognize_sequence(bundle, generate_recording(c, 1, a, 0).frames, &states);
    EXPECT_EQ(d.label, a) << default_action_names()[a];
    EXPECT_EQ(d.log_likelihoods.size(), 8);
    EXPECT_FALSE(states.labels.empty());
  }
}
