#pragma once

// Minimum-distance body-state classification in Fisher space.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bodystate/errors.hpp"
#include "bodystate/lda.hpp"
#include "bodystate/skeleton.hpp"

namespace bodystate {

enum class DistanceMetric { Euclidean, Mahalanobis };

inline std::string_view to_string(DistanceMetric metric) {
  return metric == DistanceMetric::Euclidean ? "euclidean" : "mahalanobis";
}

inline std::optional<DistanceMetric> parse_metric(std::string_view name) {
  if (name == "euclidean") return DistanceMetric::Euclidean;
  if (name == "mahalanobis") return DistanceMetric::Mahalanobis;
  return std::nullopt;
}

inline double euclidean_distance(const Eigen::Ref<const Eigen::VectorXd>& f,
                                 const Eigen::Ref<const Eigen::VectorXd>& mean) {
  if (f.size() != mean.size()) throw InputError("distance between vectors of different dimension");
  return (f - mean).norm();
}

/// sqrt((f - mean)^T S^-1 (f - mean)) given the precomputed inverse S^-1.
inline double mahalanobis_distance(const Eigen::Ref<const Eigen::VectorXd>& f,
                                   const Eigen::Ref<const Eigen::VectorXd>& mean,
                                   const Eigen::Ref<const Eigen::MatrixXd>& cov_inverse) {
  if (f.size() != mean.size() || cov_inverse.rows() != f.size() || cov_inverse.cols() != f.size()) {
    throw InputError("mahalanobis distance dimension mismatch");
  }
  const Eigen::VectorXd d = f - mean;
  const double q = d.dot(cov_inverse * d);
  return std::sqrt(std::max(q, 0.0));
}

struct StateDecision {
  std::size_t label = 0;
  Eigen::VectorXd distances;
};

/// Distances to every class mean of an already projected vector; argmin with
/// ties going to the lowest class id.
inline StateDecision classify_projected(const FisherModel& model, const Eigen::Ref<const Eigen::VectorXd>& f,
                                        DistanceMetric metric) {
  const std::size_t num_classes = model.num_classes();
  StateDecision decision;
  decision.distances.resize(static_cast<Eigen::Index>(num_classes));
  for (std::size_t c = 0; c < num_classes; ++c) {
    decision.distances[static_cast<Eigen::Index>(c)] =
        metric == DistanceMetric::Euclidean
            ? euclidean_distance(f, model.class_means[c])
            : mahalanobis_distance(f, model.class_means[c], model.class_cov_inverses[c]);
  }
  for (std::size_t c = 1; c < num_classes; ++c) {
    if (decision.distances[static_cast<Eigen::Index>(c)] < decision.distances[static_cast<Eigen::Index>(decision.label)]) {
      decision.label = c;
    }
  }
  return decision;
}

inline StateDecision classify_state(const FisherModel& model, const Eigen::Ref<const Eigen::VectorXd>& v,
                                    DistanceMetric metric) {
  return classify_projected(model, project(model, v), metric);
}

struct SkippedFrame {
  std::size_t frame_index = 0;
  std::string reason;
};

struct StateSequence {
  std::string source_id;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> frame_indices;
  std::vector<SkippedFrame> skipped;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
};

/// Per-frame select -> align -> flatten -> classify. Frames whose shoulders are
/// degenerate are dropped and logged in `skipped`.
inline StateSequence classify_sequence(const FisherModel& model, const std::vector<RawFrame>& frames,
                                       DistanceMetric metric, std::string source_id = {}) {
  if (frames.empty()) throw EmptySequenceError("no frames to classify");
  StateSequence seq;
  seq.source_id = std::move(source_id);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    RawFeatureVector v;
    try {
      v = frame_to_vector(frames[i], i);
    } catch (const DegenerateAlignmentError& e) {
      seq.skipped.push_back({i, e.what()});
      continue;
    }
    seq.labels.push_back(classify_state(model, v, metric).label);
    seq.frame_indices.push_back(i);
  }
  if (seq.empty()) throw EmptySequenceError("every frame of '" + seq.source_id + "' was degenerate");
  return seq;
}

}  // namespace bodystate
