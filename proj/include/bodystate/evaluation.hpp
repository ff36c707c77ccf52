#pragma once

// Leave-one-subject-out evaluation of body-state and action recognition.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bodystate/data_io.hpp"
#include "bodystate/detail/random.hpp"
#include "bodystate/errors.hpp"
#include "bodystate/hmm.hpp"
#include "bodystate/lda.hpp"
#include "bodystate/skeleton.hpp"
#include "bodystate/state_classifier.hpp"

namespace bodystate {

struct EvaluationConfig {
  DistanceMetric metric = DistanceMetric::Mahalanobis;
  FisherOptions fisher;
  PreprocessConfig preprocess;
  BaumWelchConfig baum_welch;  // seed is the master seed
  bool parallel_folds = true;
};

inline json config_snapshot(const EvaluationConfig& c) {
  return {{"metric", std::string(to_string(c.metric))},
          {"n_hidden", c.baum_welch.num_hidden},
          {"downsample_factor", c.preprocess.downsample_factor},
          {"equalize_training_lengths", c.preprocess.equalize_training_lengths},
          {"seed", c.baum_welch.seed},
          {"restarts", c.baum_welch.restarts},
          {"max_iters", c.baum_welch.max_iters},
          {"tol", c.baum_welch.tol},
          {"emission_floor", c.baum_welch.emission_floor},
          {"lda_ridge", c.fisher.ridge ? json(*c.fisher.ridge) : json(nullptr)},
          {"covariance_ridge_scale", c.fisher.covariance_ridge_scale}};
}

// ---------------------------------------------------------------------------
// Folds

struct Fold {
  std::string subject;
  std::vector<std::size_t> train;  // indices into manifest.recordings
  std::vector<std::size_t> test;
  std::vector<std::string> warnings;
};

inline std::vector<Fold> loso_folds(const DatasetManifest& manifest) {
  if (manifest.subjects.size() < 2) throw ConfigError("leave-one-subject-out needs at least two subjects");
  std::vector<Fold> folds;
  for (const std::string& subject : manifest.subjects) {
    Fold fold;
    fold.subject = subject;
    for (std::size_t r = 0; r < manifest.recordings.size(); ++r) {
      (manifest.recordings[r].subject == subject ? fold.test : fold.train).push_back(r);
    }
    if (fold.test.empty()) fold.warnings.push_back("subject '" + subject + "' has no recordings; empty test set");
    folds.push_back(std::move(fold));
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Confusion matrices and reports

struct ConfusionMatrix {
  std::vector<std::string> labels;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> names)
      : labels(std::move(names)),
        counts(Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(
            static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(labels.size()))) {}

  std::size_t size() const { return labels.size(); }
  void add(std::size_t truth, std::size_t predicted, std::int64_t n = 1) {
    counts(static_cast<Eigen::Index>(truth), static_cast<Eigen::Index>(predicted)) += n;
  }
  std::int64_t total() const { return counts.sum(); }
  std::int64_t correct() const { return counts.diagonal().sum(); }
  std::int64_t row_total(std::size_t i) const { return counts.row(static_cast<Eigen::Index>(i)).sum(); }
};

struct RecordingOutcome {
  std::string recording;
  std::size_t truth = 0;
  std::size_t predicted = 0;
  Eigen::VectorXd scores;
};

struct EvaluationReport {
  std::string kind;  // "states" or "actions"
  ConfusionMatrix confusion;
  std::vector<std::optional<double>> per_class_accuracy;  // empty rows have no accuracy
  double total_accuracy = 0.0;
  json config = json::object();
  std::vector<std::string> warnings;
  std::vector<RecordingOutcome> outcomes;  // action reports only
};

inline void finalize_report(EvaluationReport& report) {
  report.per_class_accuracy.clear();
  for (std::size_t i = 0; i < report.confusion.size(); ++i) {
    const std::int64_t row = report.confusion.row_total(i);
    report.per_class_accuracy.push_back(
        row > 0 ? std::optional<double>(static_cast<double>(report.confusion.counts(static_cast<Eigen::Index>(i),
                                                                                    static_cast<Eigen::Index>(i))) /
                                        static_cast<double>(row))
                : std::nullopt);
  }
  const std::int64_t total = report.confusion.total();
  report.total_accuracy = total > 0 ? static_cast<double>(report.confusion.correct()) / static_cast<double>(total) : 0.0;
}

struct BinaryFallReport {
  std::int64_t true_positives = 0;   // fall recognized as fall
  std::int64_t false_negatives = 0;  // fall recognized as normal
  std::int64_t true_negatives = 0;
  std::int64_t false_positives = 0;  // normal recognized as fall
  double recognition_rate = 0.0;
  double specificity_rate = 0.0;
  double false_alarm_rate = 0.0;
};

/// Collapses the action confusion matrix into fall / normal groups.
inline BinaryFallReport binary_fall_metrics(const ConfusionMatrix& confusion, const std::vector<std::string>& fall_set) {
  std::vector<bool> is_fall(confusion.size(), false);
  for (const auto& name : fall_set) {
    const auto it = std::find(confusion.labels.begin(), confusion.labels.end(), name);
    if (it == confusion.labels.end()) throw ConfigError("fall action '" + name + "' is not in the label table");
    is_fall[static_cast<std::size_t>(it - confusion.labels.begin())] = true;
  }
  const auto falls = static_cast<std::size_t>(std::count(is_fall.begin(), is_fall.end(), true));
  if (falls == 0 || falls == confusion.size()) throw ConfigError("fall set must be a non-empty proper subset of actions");

  BinaryFallReport r;
  for (std::size_t i = 0; i < confusion.size(); ++i) {
    for (std::size_t j = 0; j < confusion.size(); ++j) {
      const std::int64_t n = confusion.counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (is_fall[i]) (is_fall[j] ? r.true_positives : r.false_negatives) += n;
      else (is_fall[j] ? r.false_positives : r.true_negatives) += n;
    }
  }
  auto ratio = [](std::int64_t a, std::int64_t b) { return b > 0 ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  r.recognition_rate = ratio(r.true_positives, r.true_positives + r.false_negatives);
  r.specificity_rate = ratio(r.true_negatives, r.true_negatives + r.false_positives);
  r.false_alarm_rate = ratio(r.false_positives, r.true_negatives + r.false_positives);
  return r;
}

inline BinaryFallReport binary_fall_metrics(const EvaluationReport& report, const std::vector<std::string>& fall_set) {
  return binary_fall_metrics(report.confusion, fall_set);
}

// ---------------------------------------------------------------------------
// Dataset loading

/// One recording reduced to aligned feature vectors. Degenerate frames are
/// dropped at load time and listed in `skipped`.
struct LoadedRecording {
  std::size_t manifest_index = 0;
  std::string id;
  std::size_t action = 0;
  std::vector<RawFeatureVector> vectors;
  std::vector<std::size_t> frame_indices;
  std::vector<std::optional<std::size_t>> states;  // annotation per retained frame, if any
  bool annotated = false;
  std::vector<SkippedFrame> skipped;
};

struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<LoadedRecording> recordings;
};

inline LoadedDataset load_dataset(const DatasetManifest& manifest) {
  LoadedDataset data;
  data.manifest = manifest;
  for (std::size_t r = 0; r < manifest.recordings.size(); ++r) {
    const Recording& rec = manifest.recordings[r];
    LoadedRecording loaded;
    loaded.manifest_index = r;
    loaded.id = rec.id(manifest.action_names);
    loaded.action = rec.action;
    const std::vector<RawFrame> frames = load_sequence(rec.sequence_path);
    std::vector<std::optional<std::size_t>> per_frame(frames.size());
    if (rec.annotation_path) {
      loaded.annotated = true;
      for (const auto& a : load_annotations(*rec.annotation_path, manifest.state_names)) {
        if (a.frame_index >= frames.size()) {
          throw InputError(rec.annotation_path->string() + ": annotation for frame " + std::to_string(a.frame_index) +
                           " beyond the " + std::to_string(frames.size()) + " frames of the sequence");
        }
        per_frame[a.frame_index] = a.state;
      }
    }
    for (std::size_t f = 0; f < frames.size(); ++f) {
      try {
        loaded.vectors.push_back(frame_to_vector(frames[f], f));
      } catch (const DegenerateAlignmentError& e) {
        loaded.skipped.push_back({f, e.what()});
        continue;
      }
      loaded.frame_indices.push_back(f);
      loaded.states.push_back(per_frame[f]);
    }
    data.recordings.push_back(std::move(loaded));
  }
  return data;
}

namespace detail {

inline void require_annotations(const LoadedDataset& data, const std::vector<std::size_t>& indices,
                                const char* purpose) {
  std::vector<std::string> missing;
  for (std::size_t r : indices) {
    if (!data.recordings[r].annotated) missing.push_back(data.recordings[r].id);
  }
  if (missing.empty()) return;
  std::string msg = std::string("state annotations are required for ") + purpose + "; missing for:";
  for (const auto& m : missing) msg += " " + m;
  throw InputError(msg);
}

inline FisherModel fit_fold_fisher(const LoadedDataset& data, const std::vector<std::size_t>& train,
                                   const FisherOptions& options) {
  std::size_t n = 0;
  for (std::size_t r : train) {
    for (const auto& s : data.recordings[r].states) n += s ? 1 : 0;
  }
  LabeledPoseSet set;
  set.class_names = data.manifest.state_names;
  set.samples.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kFeatureDim));
  set.labels.reserve(n);
  Eigen::Index row = 0;
  for (std::size_t r : train) {
    const auto& rec = data.recordings[r];
    for (std::size_t k = 0; k < rec.vectors.size(); ++k) {
      if (!rec.states[k]) continue;
      set.samples.row(row++) = rec.vectors[k].transpose();
      set.labels.push_back(*rec.states[k]);
    }
  }
  return fit_fisher(set, options);
}

inline SymbolSequence classify_recording(const FisherModel& model, const LoadedRecording& rec, DistanceMetric metric) {
  if (rec.vectors.empty()) throw EmptySequenceError("recording '" + rec.id + "' has no usable frames");
  SymbolSequence out;
  out.reserve(rec.vectors.size());
  for (const auto& v : rec.vectors) out.push_back(classify_state(model, v, metric).label);
  return out;
}

template <class FoldFn>
auto run_folds(const std::vector<Fold>& folds, bool parallel, FoldFn&& fn) {
  using Result = decltype(fn(std::size_t{0}));
  std::vector<Result> results(folds.size());
  if (parallel && folds.size() > 1) {
    std::vector<std::future<Result>> jobs;
    for (std::size_t f = 0; f < folds.size(); ++f) jobs.push_back(std::async(std::launch::async, fn, f));
    for (std::size_t f = 0; f < folds.size(); ++f) results[f] = jobs[f].get();
  } else {
    for (std::size_t f = 0; f < folds.size(); ++f) results[f] = fn(f);
  }
  return results;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace detail

/// Per fold: fit the Fisher model on annotated training frames, classify the
/// annotated frames of the held-out subject.
inline EvaluationReport evaluate_states(const LoadedDataset& data, const EvaluationConfig& config) {
  detail::require_annotations(data, detail::all_indices(data.recordings.size()), "state evaluation");
  const std::vector<Fold> folds = loso_folds(data.manifest);

  auto run_fold = [&](std::size_t f) {
    ConfusionMatrix cm(data.manifest.state_names);
    const Fold& fold = folds[f];
    if (fold.test.empty()) return cm;
    const FisherModel model = detail::fit_fold_fisher(data, fold.train, config.fisher);
    for (std::size_t r : fold.test) {
      const auto& rec = data.recordings[r];
      for (std::size_t k = 0; k < rec.vectors.size(); ++k) {
        if (rec.states[k]) cm.add(*rec.states[k], classify_state(model, rec.vectors[k], config.metric).label);
      }
    }
    return cm;
  };
  const auto per_fold = detail::run_folds(folds, config.parallel_folds, run_fold);

  EvaluationReport report;
  report.kind = "states";
  report.confusion = ConfusionMatrix(data.manifest.state_names);
  for (const auto& cm : per_fold) report.confusion.counts += cm.counts;
  for (const auto& fold : folds) report.warnings.insert(report.warnings.end(), fold.warnings.begin(), fold.warnings.end());
  report.config = config_snapshot(config);
  finalize_report(report);
  return report;
}

/// Per fold: fit the Fisher model, train one HMM per action on the classified
/// state sequences of the training subjects, recognize each held-out recording.
inline EvaluationReport evaluate_actions(const LoadedDataset& data, const EvaluationConfig& config) {
  const std::vector<Fold> folds = loso_folds(data.manifest);
  const std::size_t num_actions = data.manifest.action_names.size();

  for (std::size_t f = 0; f < folds.size(); ++f) {
    detail::require_annotations(data, folds[f].train, "training the state model");
    std::vector<bool> seen(num_actions, false);
    for (std::size_t r : folds[f].train) seen[data.recordings[r].action] = true;
    for (std::size_t a = 0; a < num_actions; ++a) {
      if (!seen[a]) {
        throw TrainingDataError("fold " + std::to_string(f) + " (held-out subject '" + folds[f].subject +
                                "'): action '" + data.manifest.action_names[a] + "' has no training sequences");
      }
    }
  }

  struct FoldResult {
    ConfusionMatrix cm;
    std::vector<RecordingOutcome> outcomes;
  };
  auto run_fold = [&](std::size_t f) {
    const Fold& fold = folds[f];
    FoldResult result{ConfusionMatrix(data.manifest.action_names), {}};
    if (fold.test.empty()) return result;
    const FisherModel model = detail::fit_fold_fisher(data, fold.train, config.fisher);

    std::vector<std::vector<SymbolSequence>> per_action(num_actions);
    for (std::size_t r : fold.train) {
      per_action[data.recordings[r].action].push_back(detail::classify_recording(model, data.recordings[r], config.metric));
    }
    BaumWelchConfig bw = config.baum_welch;
    bw.seed = detail::derive_seed(config.baum_welch.seed, {0xf01dULL, f});
    if (config.parallel_folds) bw.parallel = false;
    const ActionModelBank bank =
        train_action_bank(per_action, data.manifest.action_names, model.num_classes(), config.preprocess, bw);

    for (std::size_t r : fold.test) {
      const auto& rec = data.recordings[r];
      const SymbolSequence symbols = prepare_for_recognition(bank, detail::classify_recording(model, rec, config.metric));
      const ActionDecision decision = recognize_action(bank, symbols);
      result.cm.add(rec.action, decision.label);
      result.outcomes.push_back({rec.id, rec.action, decision.label, decision.log_likelihoods});
    }
    return result;
  };
  auto per_fold = detail::run_folds(folds, config.parallel_folds, run_fold);

  EvaluationReport report;
  report.kind = "actions";
  report.confusion = ConfusionMatrix(data.manifest.action_names);
  for (auto& fr : per_fold) {
    report.confusion.counts += fr.cm.counts;
    for (auto& o : fr.outcomes) report.outcomes.push_back(std::move(o));
  }
  for (const auto& fold : folds) report.warnings.insert(report.warnings.end(), fold.warnings.begin(), fold.warnings.end());
  report.config = config_snapshot(config);
  finalize_report(report);
  return report;
}

/// Fits the Fisher model and the action bank on every recording of the dataset.
inline ModelBundle train_model(const LoadedDataset& data, const EvaluationConfig& config) {
  const std::vector<std::size_t> all = detail::all_indices(data.recordings.size());
  if (all.empty()) throw TrainingDataError("manifest lists no recordings");
  detail::require_annotations(data, all, "training");
  ModelBundle bundle;
  bundle.fisher = detail::fit_fold_fisher(data, all, config.fisher);
  bundle.metric = config.metric;
  std::vector<std::vector<SymbolSequence>> per_action(data.manifest.action_names.size());
  for (std::size_t r : all) {
    per_action[data.recordings[r].action].push_back(
        detail::classify_recording(bundle.fisher, data.recordings[r], config.metric));
  }
  bundle.bank = train_action_bank(per_action, data.manifest.action_names, bundle.fisher.num_classes(),
                                  config.preprocess, config.baum_welch);
  bundle.config = config_snapshot(config);
  return bundle;
}

/// Classifies each frame, downsamples, and scores the sequence against every action model.
inline ActionDecision recognize_sequence(const ModelBundle& bundle, const std::vector<RawFrame>& frames,
                                         StateSequence* states = nullptr) {
  StateSequence seq = classify_sequence(bundle.fisher, frames, bundle.metric);
  const ActionDecision d = recognize_action(bundle.bank, prepare_for_recognition(bundle.bank, seq.labels));
  if (states != nullptr) *states = std::move(seq);
  return d;
}

inline EvaluationReport evaluate_states(const DatasetManifest& manifest, const EvaluationConfig& config) {
  return evaluate_states(load_dataset(manifest), config);
}

inline EvaluationReport evaluate_actions(const DatasetManifest& manifest, const EvaluationConfig& config) {
  return evaluate_actions(load_dataset(manifest), config);
}

// ---------------------------------------------------------------------------
// Report rendering

/// Percentage rounded to two decimals.
inline double percent2(double fraction) { return std::round(fraction * 10000.0) / 100.0; }

inline json report_to_json(const EvaluationReport& report) {
  json j;
  j["kind"] = report.kind;
  j["config"] = report.config;
  j["labels"] = report.confusion.labels;
  json rows = json::array();
  for (Eigen::Index i = 0; i < report.confusion.counts.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < report.confusion.counts.cols(); ++k) row.push_back(report.confusion.counts(i, k));
    rows.push_back(std::move(row));
  }
  j["confusion"] = std::move(rows);
  json per_class = json::object();
  for (std::size_t i = 0; i < report.per_class_accuracy.size(); ++i) {
    const auto& acc = report.per_class_accuracy[i];
    per_class[report.confusion.labels[i]] = acc ? json(percent2(*acc)) : json(nullptr);
  }
  j["per_class_accuracy_percent"] = std::move(per_class);
  j["total_accuracy_percent"] = percent2(report.total_accuracy);
  j["evaluated"] = report.confusion.total();
  j["warnings"] = report.warnings;
  return j;
}

inline json fall_report_to_json(const BinaryFallReport& r) {
  return {{"true_positives", r.true_positives},
          {"false_negatives", r.false_negatives},
          {"true_negatives", r.true_negatives},
          {"false_positives", r.false_positives},
          {"recognition_rate_percent", percent2(r.recognition_rate)},
          {"specificity_rate_percent", percent2(r.specificity_rate)},
          {"false_alarm_rate_percent", percent2(r.false_alarm_rate)}};
}

inline std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * fraction);
  return buf;
}

inline std::string render_report_table(const EvaluationReport& report) {
  std::ostringstream out;
  std::size_t width = 5;
  for (const auto& l : report.confusion.labels) width = std::max(width, l.size());
  out << (report.kind == "states" ? "State" : "Action") << " recognition ("
      << report.config.value("metric", std::string("?")) << ")\n";
  for (std::size_t i = 0; i < report.confusion.size(); ++i) {
    const auto& l = report.confusion.labels[i];
    out << "  " << l << std::string(width - l.size() + 2, ' ')
        << (report.per_class_accuracy[i] ? format_percent(*report.per_class_accuracy[i]) : std::string("n/a")) << '\n';
  }
  out << "  Total" << std::string(width - 5 + 2, ' ') << format_percent(report.total_accuracy) << "\n\n";
  out << "  confusion (rows = truth, columns = prediction)\n";
  for (std::size_t i = 0; i < report.confusion.size(); ++i) {
    out << "  " << report.confusion.labels[i] << std::string(width - report.confusion.labels[i].size() + 1, ' ');
    for (std::size_t k = 0; k < report.confusion.size(); ++k) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), " %5lld",
                    static_cast<long long>(report.confusion.counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))));
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

/// Grayscale heat map of the row-normalized matrix as binary PGM, `cell` pixels per entry.
inline std::string confusion_to_pgm(const ConfusionMatrix& cm, int cell = 24) {
  const int n = static_cast<int>(cm.size());
  const int side = n * cell;
  std::string out = "P5\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
  for (int y = 0; y < side; ++y) {
    const std::size_t i = static_cast<std::size_t>(y / cell);
    const std::int64_t row = cm.row_total(i);
    for (int x = 0; x < side; ++x) {
      const std::size_t k = static_cast<std::size_t>(x / cell);
      const double frac = row > 0 ? static_cast<double>(cm.counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))) /
                                        static_cast<double>(row)
                                  : 0.0;
      out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * (1.0 - frac))));
    }
  }
  return out;
}

}  // namespace bodystate
