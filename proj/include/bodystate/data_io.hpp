#pragma once

// On-disk formats.
//
// Sequence file (text, one frame per line):
//   #version 1
//   #joints SpineBase SpineMid ... ThumbRight      (the 25 Kinect V2 names, in order)
//   #units m
//   #fps 30                                        (optional)
//   <timestamp> <x y z of joint 0> ... <x y z of joint 24>
//
// Annotation file: one "frame_index state_name" pair per line, indices strictly
// increasing. Lines starting with '#' are comments in both formats.
//
// Manifest: JSON, see `save_manifest`. Paths are relative to the manifest.
//
// Model bundle: a header line "bodystate-model <version> <crc32 hex>" followed
// by a JSON payload; the checksum covers the payload bytes.

#include <zlib.h>

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bodystate/errors.hpp"
#include "bodystate/hmm.hpp"
#include "bodystate/lda.hpp"
#include "bodystate/skeleton.hpp"
#include "bodystate/state_classifier.hpp"

namespace bodystate {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kSequenceFormatVersion = 1;
inline constexpr int kManifestFormatVersion = 1;
inline constexpr int kModelBundleVersion = 1;
inline constexpr std::size_t kFrameFields = 1 + kNumJoints * 3;

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, std::string_view delims = " \t") {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const std::size_t start = line.find_first_not_of(delims, pos);
    if (start == std::string_view::npos) break;
    std::size_t end = line.find_first_of(delims, start);
    if (end == std::string_view::npos) end = line.size();
    out.push_back(line.substr(start, end - start));
    pos = end;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view field) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) return std::nullopt;
  return value;
}

/// Shortest representation that parses back to the same double.
inline void append_double(std::string& out, double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    fn(line_no, trim(std::string_view(text).substr(pos, end - pos)));
    if (end == text.size()) break;
    pos = end + 1;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Skeleton sequences

struct SequenceFile {
  int version = kSequenceFormatVersion;
  double fps = 30.0;
  std::vector<RawFrame> frames;
};

inline SequenceFile parse_sequence(const std::string& text, const std::string& origin = "<memory>") {
  SequenceFile file;
  bool saw_version = false;
  bool saw_joints = false;
  bool saw_units = false;
  std::optional<double> last_timestamp;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.empty()) return;
    if (line.front() == '#') {
      const auto fields = detail::split_fields(line.substr(1));
      if (fields.empty()) return;
      const std::string_view key = fields[0];
      if (key == "version") {
        if (fields.size() != 2) throw ParseError(origin, line_no, "malformed #version");
        if (fields[1] != std::to_string(kSequenceFormatVersion)) {
          throw UnsupportedVersionError(origin + ": unsupported sequence format version " + std::string(fields[1]));
        }
        saw_version = true;
      } else if (key == "joints") {
        if (fields.size() != kNumJoints + 1) {
          throw ParseError(origin, line_no, "joint table lists " + std::to_string(fields.size() - 1) +
                                                " names, expected " + std::to_string(kNumJoints));
        }
        for (std::size_t i = 0; i < kNumJoints; ++i) {
          if (fields[i + 1] != kJointNames[i]) {
            throw ParseError(origin, line_no, "joint table mismatch at position " + std::to_string(i) + ": '" +
                                                  std::string(fields[i + 1]) + "' vs '" +
                                                  std::string(kJointNames[i]) + "'");
          }
        }
        saw_joints = true;
      } else if (key == "units") {
        if (fields.size() != 2 || fields[1] != "m") throw ParseError(origin, line_no, "units must be 'm'");
        saw_units = true;
      } else if (key == "fps") {
        const auto fps = fields.size() == 2 ? detail::parse_double(fields[1]) : std::nullopt;
        if (!fps || !(*fps > 0) || !std::isfinite(*fps)) throw ParseError(origin, line_no, "malformed #fps");
        file.fps = *fps;
      }
      return;
    }
    if (!saw_version || !saw_joints || !saw_units) {
      throw ParseError(origin, line_no, "frame data before complete header (#version, #joints, #units)");
    }
    const auto fields = detail::split_fields(line);
    if (fields.size() != kFrameFields) {
      throw ParseError(origin, line_no, "expected " + std::to_string(kFrameFields) + " numeric fields, got " +
                                            std::to_string(fields.size()));
    }
    RawFrame frame;
    frame.joints.resize(kNumJoints);
    std::array<double, kFrameFields> values{};
    for (std::size_t i = 0; i < kFrameFields; ++i) {
      const auto v = detail::parse_double(fields[i]);
      if (!v) throw ParseError(origin, line_no, "field " + std::to_string(i + 1) + " is not a number");
      if (!std::isfinite(*v)) throw ParseError(origin, line_no, "field " + std::to_string(i + 1) + " is not finite");
      values[i] = *v;
    }
    frame.timestamp = values[0];
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      frame.joints[j] = Joint3D(values[1 + 3 * j], values[2 + 3 * j], values[3 + 3 * j]);
    }
    if (last_timestamp && frame.timestamp < *last_timestamp) {
      throw ParseError(origin, line_no, "timestamps must be non-decreasing");
    }
    last_timestamp = frame.timestamp;
    file.frames.push_back(std::move(frame));
  });
  if (!saw_version || !saw_joints || !saw_units) {
    throw ParseError(origin, 0, "missing header (#version, #joints, #units are required)");
  }
  return file;
}

inline SequenceFile read_sequence_file(const fs::path& path) {
  return parse_sequence(detail::read_file(path), path.string());
}

inline std::vector<RawFrame> load_sequence(const fs::path& path) { return read_sequence_file(path).frames; }

inline std::string format_sequence(const std::vector<RawFrame>& frames, double fps = 30.0) {
  std::string out = "#version " + std::to_string(kSequenceFormatVersion) + "\n#joints";
  for (auto name : kJointNames) {
    out += ' ';
    out += name;
  }
  out += "\n#units m\n#fps ";
  detail::append_double(out, fps);
  out += '\n';
  for (const RawFrame& frame : frames) {
    validate_frame(frame);
    detail::append_double(out, frame.timestamp);
    for (const Joint3D& j : frame.joints) {
      for (int k = 0; k < 3; ++k) {
        out += ' ';
        detail::append_double(out, j[k]);
      }
    }
    out += '\n';
  }
  return out;
}

inline void save_sequence(const fs::path& path, const std::vector<RawFrame>& frames, double fps = 30.0) {
  detail::write_file(path, format_sequence(frames, fps));
}

// ---------------------------------------------------------------------------
// Per-frame state annotations

struct FrameAnnotation {
  std::size_t frame_index = 0;
  std::size_t state = 0;
};

inline std::vector<FrameAnnotation> parse_annotations(const std::string& text,
                                                      const std::vector<std::string>& state_names,
                                                      const std::string& origin = "<memory>") {
  std::vector<FrameAnnotation> out;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.empty() || line.front() == '#') return;
    const auto fields = detail::split_fields(line);
    if (fields.size() != 2) throw ParseError(origin, line_no, "expected 'frame_index state_name'");
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), index);
    if (ec != std::errc() || ptr != fields[0].data() + fields[0].size()) {
      throw ParseError(origin, line_no, "frame index is not a non-negative integer");
    }
    const auto it = std::find(state_names.begin(), state_names.end(), fields[1]);
    if (it == state_names.end()) throw ParseError(origin, line_no, "unknown state '" + std::string(fields[1]) + "'");
    if (!out.empty() && index <= out.back().frame_index) {
      throw ParseError(origin, line_no, "frame indices must be strictly increasing");
    }
    out.push_back({index, static_cast<std::size_t>(it - state_names.begin())});
  });
  return out;
}

inline std::vector<FrameAnnotation> load_annotations(const fs::path& path,
                                                     const std::vector<std::string>& state_names) {
  return parse_annotations(detail::read_file(path), state_names, path.string());
}

inline void save_annotations(const fs::path& path, const std::vector<std::size_t>& per_frame_states,
                             const std::vector<std::string>& state_names) {
  std::string out;
  for (std::size_t i = 0; i < per_frame_states.size(); ++i) {
    out += std::to_string(i);
    out += ' ';
    out += state_names.at(per_frame_states[i]);
    out += '\n';
  }
  detail::write_file(path, out);
}

// ---------------------------------------------------------------------------
// Dataset manifest

struct Recording {
  std::string subject;
  std::size_t action = 0;
  std::size_t repetition = 0;
  fs::path sequence_path;
  std::optional<fs::path> annotation_path;

  std::string id(const std::vector<std::string>& action_names) const {
    return subject + "/" + action_names.at(action) + "/" + std::to_string(repetition);
  }
};

struct DatasetManifest {
  std::vector<std::string> state_names;
  std::vector<std::string> action_names;
  std::vector<std::string> subjects;
  std::vector<Recording> recordings;
  fs::path base_dir;
  json metadata = json::object();
};

namespace detail {

inline std::size_t index_in(const std::vector<std::string>& names, const std::string& name, const char* what) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InputError(std::string("unknown ") + what + " '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

inline std::string relative_string(const fs::path& p, const fs::path& base) {
  if (base.empty()) return p.generic_string();
  return p.lexically_relative(base).generic_string();
}

}  // namespace detail

inline void validate_manifest(const DatasetManifest& manifest) {
  if (manifest.state_names.size() < 2) throw InputError("manifest needs at least two states");
  if (manifest.action_names.empty()) throw InputError("manifest lists no actions");
  for (const auto& s : manifest.subjects) {
    if (s.empty()) throw InputError("empty subject id in manifest");
  }
  for (const auto& r : manifest.recordings) {
    if (std::find(manifest.subjects.begin(), manifest.subjects.end(), r.subject) == manifest.subjects.end()) {
      throw InputError("recording references unknown subject '" + r.subject + "'");
    }
    if (r.action >= manifest.action_names.size()) throw InputError("recording action out of range");
    if (!fs::is_regular_file(r.sequence_path)) throw IoError("missing sequence file " + r.sequence_path.string());
    if (r.annotation_path && !fs::is_regular_file(*r.annotation_path)) {
      throw IoError("missing annotation file " + r.annotation_path->string());
    }
  }
}

inline json manifest_to_json(const DatasetManifest& manifest) {
  json j;
  j["format"] = "bodystate-manifest";
  j["version"] = kManifestFormatVersion;
  j["states"] = manifest.state_names;
  j["actions"] = manifest.action_names;
  j["subjects"] = manifest.subjects;
  j["metadata"] = manifest.metadata;
  json recs = json::array();
  for (const auto& r : manifest.recordings) {
    json rec;
    rec["subject"] = r.subject;
    rec["action"] = manifest.action_names.at(r.action);
    rec["repetition"] = r.repetition;
    rec["sequence"] = detail::relative_string(r.sequence_path, manifest.base_dir);
    if (r.annotation_path) rec["annotation"] = detail::relative_string(*r.annotation_path, manifest.base_dir);
    recs.push_back(std::move(rec));
  }
  j["recordings"] = std::move(recs);
  return j;
}

inline void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  detail::write_file(path, manifest_to_json(manifest).dump(2) + "\n");
}

inline DatasetManifest load_manifest(const fs::path& path) {
  json j;
  try {
    j = json::parse(detail::read_file(path));
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  DatasetManifest manifest;
  manifest.base_dir = path.parent_path();
  try {
    if (j.value("format", "") != "bodystate-manifest") throw IoError(path.string() + ": not a manifest file");
    const int version = j.at("version").get<int>();
    if (version != kManifestFormatVersion) {
      throw UnsupportedVersionError(path.string() + ": unsupported manifest version " + std::to_string(version));
    }
    manifest.state_names = j.at("states").get<std::vector<std::string>>();
    manifest.action_names = j.at("actions").get<std::vector<std::string>>();
    manifest.subjects = j.at("subjects").get<std::vector<std::string>>();
    manifest.metadata = j.value("metadata", json::object());
    for (const auto& rec : j.at("recordings")) {
      Recording r;
      r.subject = rec.at("subject").get<std::string>();
      r.action = detail::index_in(manifest.action_names, rec.at("action").get<std::string>(), "action");
      r.repetition = rec.value("repetition", std::size_t{0});
      r.sequence_path = manifest.base_dir / rec.at("sequence").get<std::string>();
      if (rec.contains("annotation") && !rec["annotation"].is_null()) {
        r.annotation_path = manifest.base_dir / rec["annotation"].get<std::string>();
      }
      manifest.recordings.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": malformed manifest: " + e.what());
  }
  validate_manifest(manifest);
  return manifest;
}

// ---------------------------------------------------------------------------
// Model bundle

struct ModelBundle {
  FisherModel fisher;
  ActionModelBank bank;
  DistanceMetric metric = DistanceMetric::Mahalanobis;
  /// Snapshot of the run configuration, including the master seed.
  json config = json::object();
};

namespace detail {

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  Eigen::MatrixXd m(rows, cols);
  const json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw IoError("matrix row count mismatch");
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = data[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != cols) throw IoError("matrix column count mismatch");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline json fisher_to_json(const FisherModel& m) {
  json j;
  j["class_names"] = m.class_names;
  j["projection"] = detail::matrix_to_json(m.projection);
  j["eigenvalues"] = detail::vector_to_json(m.eigenvalues);
  j["ridge"] = m.ridge;
  j["covariance_ridges"] = m.covariance_ridges;
  j["effective_rank"] = m.effective_rank;
  json classes = json::array();
  for (std::size_t c = 0; c < m.num_classes(); ++c) {
    classes.push_back({{"mean", detail::vector_to_json(m.class_means[c])},
                       {"covariance", detail::matrix_to_json(m.class_covariances[c])},
                       {"covariance_inverse", detail::matrix_to_json(m.class_cov_inverses[c])}});
  }
  j["classes"] = std::move(classes);
  return j;
}

inline FisherModel fisher_from_json(const json& j) {
  FisherModel m;
  m.class_names = j.at("class_names").get<std::vector<std::string>>();
  m.projection = detail::matrix_from_json(j.at("projection"));
  m.eigenvalues = detail::vector_from_json(j.at("eigenvalues"));
  m.ridge = j.at("ridge").get<double>();
  m.covariance_ridges = j.at("covariance_ridges").get<std::vector<double>>();
  m.effective_rank = j.at("effective_rank").get<std::size_t>();
  for (const auto& c : j.at("classes")) {
    m.class_means.push_back(detail::vector_from_json(c.at("mean")));
    m.class_covariances.push_back(detail::matrix_from_json(c.at("covariance")));
    m.class_cov_inverses.push_back(detail::matrix_from_json(c.at("covariance_inverse")));
  }
  if (m.class_means.size() != m.class_names.size()) throw IoError("fisher model class count mismatch");
  return m;
}

inline json hmm_to_json(const DiscreteHmm& h) {
  return {{"initial", detail::vector_to_json(h.initial)},
          {"transition", detail::matrix_to_json(h.transition)},
          {"emission", detail::matrix_to_json(h.emission)},
          {"training",
           {{"seed", h.training.seed},
            {"restarts", h.training.restarts},
            {"best_restart", h.training.best_restart},
            {"iterations", h.training.iterations},
            {"converged", h.training.converged},
            {"log_likelihood", h.training.log_likelihood}}}};
}

inline DiscreteHmm hmm_from_json(const json& j) {
  DiscreteHmm h;
  h.initial = detail::vector_from_json(j.at("initial"));
  h.transition = detail::matrix_from_json(j.at("transition"));
  h.emission = detail::matrix_from_json(j.at("emission"));
  const json& t = j.at("training");
  h.training.seed = t.at("seed").get<std::uint64_t>();
  h.training.restarts = t.at("restarts").get<std::size_t>();
  h.training.best_restart = t.at("best_restart").get<std::size_t>();
  h.training.iterations = t.at("iterations").get<std::size_t>();
  h.training.converged = t.at("converged").get<bool>();
  h.training.log_likelihood = t.at("log_likelihood").get<double>();
  validate_hmm(h);
  return h;
}

inline json bank_to_json(const ActionModelBank& b) {
  json models = json::array();
  for (std::size_t a = 0; a < b.models.size(); ++a) {
    json m = hmm_to_json(b.models[a]);
    m["action"] = b.action_names[a];
    models.push_back(std::move(m));
  }
  return {{"num_symbols", b.num_symbols},
          {"preprocess",
           {{"downsample_factor", b.preprocess.downsample_factor},
            {"equalize_training_lengths", b.preprocess.equalize_training_lengths}}},
          {"baum_welch",
           {{"num_hidden", b.training.num_hidden},
            {"max_iters", b.training.max_iters},
            {"tol", b.training.tol},
            {"restarts", b.training.restarts},
            {"seed", b.training.seed},
            {"emission_floor", b.training.emission_floor}}},
          {"models", std::move(models)}};
}

inline ActionModelBank bank_from_json(const json& j) {
  ActionModelBank b;
  b.num_symbols = j.at("num_symbols").get<std::size_t>();
  const json& p = j.at("preprocess");
  b.preprocess.downsample_factor = p.at("downsample_factor").get<std::size_t>();
  b.preprocess.equalize_training_lengths = p.at("equalize_training_lengths").get<bool>();
  const json& bw = j.at("baum_welch");
  b.training.num_hidden = bw.at("num_hidden").get<std::size_t>();
  b.training.max_iters = bw.at("max_iters").get<std::size_t>();
  b.training.tol = bw.at("tol").get<double>();
  b.training.restarts = bw.at("restarts").get<std::size_t>();
  b.training.seed = bw.at("seed").get<std::uint64_t>();
  b.training.emission_floor = bw.at("emission_floor").get<double>();
  for (const auto& m : j.at("models")) {
    b.action_names.push_back(m.at("action").get<std::string>());
    b.models.push_back(hmm_from_json(m));
    if (b.models.back().num_symbols() != b.num_symbols) throw IoError("HMM symbol count mismatch in bank");
  }
  return b;
}

inline std::string serialize_bundle(const ModelBundle& bundle) {
  json payload;
  payload["fisher"] = fisher_to_json(bundle.fisher);
  payload["bank"] = bank_to_json(bundle.bank);
  payload["metric"] = std::string(to_string(bundle.metric));
  payload["config"] = bundle.config;
  const std::string body = payload.dump() + "\n";
  char header[64];
  std::snprintf(header, sizeof(header), "bodystate-model %d %08x\n", kModelBundleVersion,
                detail::crc32_of(body));
  return header + body;
}

inline ModelBundle deserialize_bundle(const std::string& bytes, const std::string& origin = "<memory>") {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos) throw IoError(origin + ": truncated model bundle");
  const auto header = detail::split_fields(std::string_view(bytes).substr(0, nl));
  if (header.size() != 3 || header[0] != "bodystate-model") throw IoError(origin + ": not a model bundle");
  if (header[1] != std::to_string(kModelBundleVersion)) {
    throw UnsupportedVersionError(origin + ": unsupported model bundle version " + std::string(header[1]) +
                                  " (this build reads version " + std::to_string(kModelBundleVersion) + ")");
  }
  std::uint32_t expected = 0;
  const auto [ptr, ec] = std::from_chars(header[2].data(), header[2].data() + header[2].size(), expected, 16);
  if (ec != std::errc() || ptr != header[2].data() + header[2].size()) throw IoError(origin + ": malformed checksum");
  const std::string_view body = std::string_view(bytes).substr(nl + 1);
  if (detail::crc32_of(body) != expected) throw ChecksumError(origin + ": checksum mismatch, bundle is corrupted");

  ModelBundle bundle;
  try {
    const json payload = json::parse(body);
    bundle.fisher = fisher_from_json(payload.at("fisher"));
    bundle.bank = bank_from_json(payload.at("bank"));
    const auto metric = parse_metric(payload.at("metric").get<std::string>());
    if (!metric) throw IoError(origin + ": unknown metric in bundle");
    bundle.metric = *metric;
    bundle.config = payload.value("config", json::object());
  } catch (const json::exception& e) {
    throw IoError(origin + ": malformed bundle payload: " + e.what());
  }
  if (bundle.bank.num_symbols != bundle.fisher.num_classes()) {
    throw IoError(origin + ": bank symbol count does not match the state model");
  }
  return bundle;
}

inline void save_model(const fs::path& path, const ModelBundle& bundle) {
  detail::write_file(path, serialize_bundle(bundle));
}

inline ModelBundle load_model(const fs::path& path) {
  return deserialize_bundle(detail::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// TST Fall Detection skeleton adapter
//
// Converts a delimited text export with one frame per line and the 25 joints in
// Kinect V2 order. Each joint occupies `values_per_joint` columns whose first
// three are x, y, z in meters (extra columns such as tracking state are
// ignored). An optional leading timestamp column is scaled to seconds by
// `timestamp_scale`; without one, timestamps are frame_index / fps.

struct TstLayout {
  bool has_timestamp = false;
  double timestamp_scale = 1.0;
  std::size_t values_per_joint = 3;
  double fps = 30.0;
  std::string delimiters = " \t,;";
};

inline std::vector<RawFrame> parse_tst_skeleton(const std::string& text, const TstLayout& layout,
                                                const std::string& origin = "<memory>") {
  if (layout.values_per_joint < 3) throw ConfigError("values_per_joint must be >= 3");
  const std::size_t expected = (layout.has_timestamp ? 1 : 0) + kNumJoints * layout.values_per_joint;
  std::vector<RawFrame> frames;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.empty() || line.front() == '#') return;
    const auto fields = detail::split_fields(line, layout.delimiters);
    if (fields.size() != expected) {
      throw ParseError(origin, line_no, "expected " + std::to_string(expected) + " fields, got " +
                                            std::to_string(fields.size()));
    }
    auto number = [&](std::size_t i) {
      const auto v = detail::parse_double(fields[i]);
      if (!v || !std::isfinite(*v)) throw ParseError(origin, line_no, "field " + std::to_string(i + 1) + " is invalid");
      return *v;
    };
    RawFrame frame;
    const std::size_t offset = layout.has_timestamp ? 1 : 0;
    frame.timestamp = layout.has_timestamp ? number(0) * layout.timestamp_scale
                                           : static_cast<double>(frames.size()) / layout.fps;
    frame.joints.resize(kNumJoints);
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      const std::size_t base = offset + j * layout.values_per_joint;
      frame.joints[j] = Joint3D(number(base), number(base + 1), number(base + 2));
    }
    frames.push_back(std::move(frame));
  });
  return frames;
}

/// Returns the number of frames written.
inline std::size_t convert_tst_skeleton(const fs::path& input, const fs::path& output, const TstLayout& layout = {}) {
  const auto frames = parse_tst_skeleton(detail::read_file(input), layout, input.string());
  save_sequence(output, frames, layout.fps);
  return frames.size();
}

}  // namespace bodystate
