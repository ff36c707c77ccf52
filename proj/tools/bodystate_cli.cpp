// bodystate: synthetic data generation, training, recognition and evaluation.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bodystate/bodystate.hpp"

namespace fs = std::filesystem;
using bodystate::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

constexpr const char* kDataDirEnv = "BODYSTATE_DATA_DIR";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::optional<fs::path> data_dir() {
  const char* v = std::getenv(kDataDirEnv);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return fs::path(v);
}

/// Pipeline flags shared by train and evaluate. Unset flags fall back to the
/// config file, then to the library defaults.
struct PipelineFlags {
  std::string config_file;
  std::optional<std::string> metric;
  std::optional<std::size_t> n_hidden;
  std::optional<std::size_t> downsample;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> restarts;
  std::optional<std::size_t> max_iters;
  std::optional<double> tol;
  std::optional<double> lda_ridge;
  bool serial = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON run configuration (flags override it)")->check(CLI::ExistingFile);
    cmd->add_option("--metric", metric, "state distance: mahalanobis or euclidean")
        ->check(CLI::IsMember({"mahalanobis", "euclidean"}));
    cmd->add_option("--n-hidden", n_hidden, "hidden states per action HMM")->check(CLI::PositiveNumber);
    cmd->add_option("--downsample", downsample, "keep every k-th state label")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--restarts", restarts, "Baum-Welch restarts")->check(CLI::PositiveNumber);
    cmd->add_option("--max-iters", max_iters, "Baum-Welch iteration cap")->check(CLI::PositiveNumber);
    cmd->add_option("--tol", tol, "Baum-Welch stop threshold on |delta log-likelihood|");
    cmd->add_option("--lda-ridge", lda_ridge, "ridge added to the within-class scatter");
    cmd->add_flag("--serial", serial, "run folds and restarts on one thread");
  }

  bodystate::EvaluationConfig resolve() const {
    bodystate::EvaluationConfig c;
    json file = json::object();
    if (!config_file.empty()) {
      try {
        file = json::parse(bodystate::detail::read_file(config_file));
      } catch (const json::parse_error& e) {
        throw bodystate::IoError(config_file + ": " + e.what());
      }
      if (!file.is_object()) throw bodystate::ConfigError(config_file + ": expected a JSON object");
    }
    try {
      const std::string m = metric.value_or(file.value("metric", std::string("mahalanobis")));
      const auto parsed = bodystate::parse_metric(m);
      if (!parsed) throw bodystate::ConfigError("unknown metric '" + m + "'");
      c.metric = *parsed;
      c.baum_welch.num_hidden = n_hidden.value_or(file.value("n_hidden", c.baum_welch.num_hidden));
      c.preprocess.downsample_factor = downsample.value_or(file.value("downsample_factor", c.preprocess.downsample_factor));
      c.preprocess.equalize_training_lengths =
          file.value("equalize_training_lengths", c.preprocess.equalize_training_lengths);
      c.baum_welch.seed = seed.value_or(file.value("seed", c.baum_welch.seed));
      c.baum_welch.restarts = restarts.value_or(file.value("restarts", c.baum_welch.restarts));
      c.baum_welch.max_iters = max_iters.value_or(file.value("max_iters", c.baum_welch.max_iters));
      c.baum_welch.tol = tol.value_or(file.value("tol", c.baum_welch.tol));
      c.baum_welch.emission_floor = file.value("emission_floor", c.baum_welch.emission_floor);
      if (lda_ridge) {
        c.fisher.ridge = *lda_ridge;
      } else if (file.contains("lda_ridge") && !file["lda_ridge"].is_null()) {
        c.fisher.ridge = file["lda_ridge"].get<double>();
      }
    } catch (const json::exception& e) {
      throw bodystate::ConfigError(config_file + ": " + e.what());
    }
    if (c.baum_welch.num_hidden == 0 || c.preprocess.downsample_factor == 0 || c.baum_welch.restarts == 0) {
      throw bodystate::ConfigError("n_hidden, downsample_factor and restarts must be positive");
    }
    if (serial) {
      c.parallel_folds = false;
      c.baum_welch.parallel = false;
    }
    return c;
  }
};

fs::path manifest_or_default(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const auto dir = data_dir()) return *dir / "manifest.json";
  throw UsageError(std::string("--manifest is required (or set ") + kDataDirEnv + ")");
}

int cmd_synth(const fs::path& out, std::size_t subjects, std::size_t reps, std::uint64_t seed,
              std::optional<double> noise) {
  bodystate::SyntheticConfig c = bodystate::default_synthetic_config();
  c.n_subjects = subjects;
  c.repetitions = reps;
  c.seed = seed;
  if (noise) c.noise_std = *noise;
  const bodystate::DatasetManifest m = bodystate::generate_synthetic_dataset(c, out);
  std::size_t frames = 0;
  for (const auto& r : m.recordings) frames += bodystate::load_sequence(r.sequence_path).size();
  std::cout << "wrote " << m.recordings.size() << " recordings (" << m.subjects.size() << " subjects, "
            << m.action_names.size() << " actions, " << c.repetitions << " repetitions, " << frames
            << " frames) to " << (out / "manifest.json").string() << "\n";
  return kExitOk;
}

int cmd_train(const fs::path& manifest_path, const fs::path& out, const bodystate::EvaluationConfig& config) {
  const bodystate::LoadedDataset data = bodystate::load_dataset(bodystate::load_manifest(manifest_path));
  const bodystate::ModelBundle bundle = bodystate::train_model(data, config);
  bodystate::save_model(out, bundle);
  std::cout << "state model: " << bundle.fisher.num_classes() << " states, Fisher dimension "
            << bundle.fisher.output_dim() << "\n";
  for (std::size_t a = 0; a < bundle.bank.models.size(); ++a) {
    const auto& t = bundle.bank.models[a].training;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "  %-12s log-likelihood %14.6f  (restart %zu, %zu iterations%s)\n",
                  bundle.bank.action_names[a].c_str(), t.log_likelihood, t.best_restart, t.iterations,
                  t.converged ? "" : ", not converged");
    std::cout << buf;
  }
  std::cout << "wrote " << out.string() << "\n";
  return kExitOk;
}

int cmd_recognize(const fs::path& model_path, const fs::path& sequence_path, bool as_json) {
  const bodystate::ModelBundle bundle = bodystate::load_model(model_path);
  const auto frames = bodystate::load_sequence(sequence_path);
  if (frames.empty()) throw bodystate::EmptySequenceError(sequence_path.string() + ": sequence has no frames");
  bodystate::StateSequence states;
  const bodystate::ActionDecision d = bodystate::recognize_sequence(bundle, frames, &states);
  const auto& names = bundle.bank.action_names;
  if (as_json) {
    json scores = json::array();
    for (std::size_t a = 0; a < names.size(); ++a) {
      scores.push_back({{"action", names[a]}, {"log_likelihood", d.log_likelihoods[static_cast<Eigen::Index>(a)]}});
    }
    std::cout << json{{"action", names[d.label]}, {"scores", scores}, {"frames", frames.size()},
                      {"skipped_frames", states.skipped.size()}}
                     .dump(2)
              << "\n";
    return kExitOk;
  }
  std::cout << "action: " << names[d.label] << "\n";
  for (std::size_t a = 0; a < names.size(); ++a) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "  %-12s %16.6f%s\n", names[a].c_str(), d.log_likelihoods[static_cast<Eigen::Index>(a)],
                  a == d.label ? "  <" : "");
    std::cout << buf;
  }
  if (!states.skipped.empty()) std::cerr << "skipped " << states.skipped.size() << " degenerate frame(s)\n";
  return kExitOk;
}

std::vector<std::size_t> parse_sweep(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      const long v = std::stol(item, &pos);
      if (pos != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("--sweep-hidden expects a comma-separated list of positive integers, got '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("--sweep-hidden list is empty");
  return out;
}

int cmd_evaluate(const fs::path& manifest_path, const fs::path& out, const std::string& what,
                 const bodystate::EvaluationConfig& config, const std::string& sweep_text, bool images,
                 const std::vector<std::string>& fall_actions) {
  const bodystate::LoadedDataset data = bodystate::load_dataset(bodystate::load_manifest(manifest_path));
  const std::vector<std::size_t> sweep = sweep_text.empty() ? std::vector<std::size_t>{} : parse_sweep(sweep_text);

  json report;
  report["format"] = "bodystate-report";
  report["version"] = 1;
  report["manifest"] = manifest_path.filename().string();
  report["config"] = bodystate::config_snapshot(config);
  std::string text;
  std::vector<std::pair<std::string, bodystate::ConfusionMatrix>> matrices;

  if (what == "states" || what == "all") {
    const bodystate::EvaluationReport r = bodystate::evaluate_states(data, config);
    report["states"] = bodystate::report_to_json(r);
    text += bodystate::render_report_table(r) + "\n";
    matrices.emplace_back("states", r.confusion);
  }
  if (what == "actions" || what == "all") {
    const bodystate::EvaluationReport r = bodystate::evaluate_actions(data, config);
    report["actions"] = bodystate::report_to_json(r);
    text += bodystate::render_report_table(r) + "\n";
    matrices.emplace_back("actions", r.confusion);

    std::vector<std::string> falls;
    for (const auto& f : fall_actions) {
      if (std::find(r.confusion.labels.begin(), r.confusion.labels.end(), f) != r.confusion.labels.end()) {
        falls.push_back(f);
      }
    }
    if (!falls.empty() && falls.size() < r.confusion.size()) {
      const bodystate::BinaryFallReport fr = bodystate::binary_fall_metrics(r, falls);
      report["fall_detection"] = bodystate::fall_report_to_json(fr);
      report["fall_detection"]["fall_actions"] = falls;
      text += "Fall detection (fall vs normal)\n  recognition rate  " + bodystate::format_percent(fr.recognition_rate) +
              "\n  specificity       " + bodystate::format_percent(fr.specificity_rate) + "\n  false alarm rate  " +
              bodystate::format_percent(fr.false_alarm_rate) + "\n\n";
    }

    if (!sweep.empty()) {
      json rows = json::array();
      text += "Hidden-state sweep (action accuracy)\n";
      for (std::size_t n : sweep) {
        bodystate::EvaluationConfig c = config;
        c.baum_welch.num_hidden = n;
        const double total = n == config.baum_welch.num_hidden ? r.total_accuracy
                                                               : bodystate::evaluate_actions(data, c).total_accuracy;
        rows.push_back({{"n_hidden", n}, {"total_accuracy_percent", bodystate::percent2(total)}});
        text += "  " + std::to_string(n) + " states  " + bodystate::format_percent(total) + "\n";
      }
      report["sweep_hidden"] = rows;
      text += "\n";
    }
  }

  fs::create_directories(out);
  bodystate::detail::write_file(out / "report.json", report.dump(2) + "\n");
  bodystate::detail::write_file(out / "report.txt", text);
  if (images) {
    for (const auto& [name, cm] : matrices) {
      bodystate::detail::write_file(out / (name + "_confusion.pgm"), bodystate::confusion_to_pgm(cm));
    }
  }
  std::cout << text << "wrote " << (out / "report.json").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skeleton-based body state and action recognition"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic annotated dataset");
  std::string synth_out;
  std::size_t subjects = 11, reps = 3;
  std::uint64_t synth_seed = 7;
  std::optional<double> noise;
  synth->add_option("--out", synth_out, std::string("output directory (default $") + kDataDirEnv + ")");
  synth->add_option("--subjects", subjects, "number of subjects")->check(CLI::PositiveNumber);
  synth->add_option("--repetitions", reps, "recordings per subject and action")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--noise", noise, "per-frame joint noise standard deviation (m)");

  auto* train = app.add_subcommand("train", "fit the state model and the action HMMs");
  std::string train_manifest, train_out;
  PipelineFlags train_flags;
  train->add_option("--manifest", train_manifest, "dataset manifest");
  train->add_option("--out", train_out, "model bundle to write")->required();
  train_flags.attach(train);

  auto* recognize = app.add_subcommand("recognize", "recognize the action in one skeleton sequence");
  std::string model_path, sequence_path;
  bool as_json = false;
  recognize->add_option("--model", model_path, "model bundle")->required();
  recognize->add_option("sequence", sequence_path, "skeleton sequence file")->required();
  recognize->add_flag("--json", as_json, "print JSON instead of a table");

  auto* evaluate = app.add_subcommand("evaluate", "leave-one-subject-out evaluation");
  std::string eval_manifest, eval_out, what = "all", sweep;
  bool images = false;
  std::vector<std::string> fall_actions = bodystate::default_fall_actions();
  PipelineFlags eval_flags;
  evaluate->add_option("--manifest", eval_manifest, "dataset manifest");
  evaluate->add_option("--out", eval_out, "report directory")->required();
  evaluate->add_option("--what", what, "states, actions or all")->check(CLI::IsMember({"states", "actions", "all"}));
  evaluate->add_option("--sweep-hidden", sweep, "comma-separated hidden-state counts, e.g. 2,3,4");
  evaluate->add_flag("--confusion-images", images, "write confusion matrices as PGM images");
  evaluate->add_option("--fall-actions", fall_actions, "actions counted as falls")->delimiter(',');
  eval_flags.attach(evaluate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      fs::path out = synth_out;
      if (out.empty()) {
        const auto dir = data_dir();
        if (!dir) throw UsageError(std::string("--out is required (or set ") + kDataDirEnv + ")");
        out = *dir;
      }
      return cmd_synth(out, subjects, reps, synth_seed, noise);
    }
    if (train->parsed()) return cmd_train(manifest_or_default(train_manifest), train_out, train_flags.resolve());
    if (recognize->parsed()) return cmd_recognize(model_path, sequence_path, as_json);
    if (evaluate->parsed()) {
      const auto config = eval_flags.resolve();
      if (!sweep.empty()) parse_sweep(sweep);
      return cmd_evaluate(manifest_or_default(eval_manifest), eval_out, what, config, sweep, images, fall_actions);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const bodystate::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const bodystate::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const bodystate::SingularityError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const bodystate::DegenerateAlignmentError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const bodystate::EmptySequenceError& e) {
    std::cerr << "empty sequence: " << e.what() << "\n";
    return kExitFailure;
  } catch (const bodystate::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitFailure;
}
