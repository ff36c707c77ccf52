#pragma once

// Fisher linear discriminant analysis over labeled pose vectors.
//
// The between-class scatter is taken around the unweighted mean of the class
// means. The projection keeps the C-1 leading generalized eigenvectors of
// (S_w + ridge*I, S_b), each unit-norm with its first nonzero entry positive.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "bodystate/errors.hpp"

namespace bodystate {

/// Body-state names used by the default eight-state configuration.
inline const std::vector<std::string>& default_state_names() {
  static const std::vector<std::string> names = {
      "stand", "crouching", "lay_back", "lay_front", "lay_side", "bend", "sit_on_chair", "sit_on_ground",
  };
  return names;
}

/// Samples are rows of `samples`; `labels[k]` is the class id of row k.
struct LabeledPoseSet {
  Eigen::MatrixXd samples;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;

  std::size_t num_classes() const { return class_names.size(); }
  Eigen::Index dim() const { return samples.cols(); }
};

struct ScatterPair {
  Eigen::MatrixXd within;
  Eigen::MatrixXd between;
};

struct ClassSummary {
  std::vector<Eigen::VectorXd> means;
  std::vector<std::size_t> counts;
  Eigen::VectorXd mean_of_means;
};

namespace detail {

inline void check_pose_set(const LabeledPoseSet& data) {
  const std::size_t num_classes = data.num_classes();
  if (num_classes < 2) throw TrainingDataError("at least two classes are required");
  if (data.labels.size() != static_cast<std::size_t>(data.samples.rows())) {
    throw InputError("label count does not match sample count");
  }
  if (!data.samples.allFinite()) throw InputError("training samples contain non-finite values");
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t label : data.labels) {
    if (label >= num_classes) throw InputError("label " + std::to_string(label) + " out of range");
    ++counts[label];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] < 2) {
      throw TrainingDataError("class '" + data.class_names[c] + "' has " + std::to_string(counts[c]) +
                              " samples; at least 2 are required");
    }
  }
}

}  // namespace detail

inline ClassSummary summarize_classes(const LabeledPoseSet& data) {
  detail::check_pose_set(data);
  const std::size_t num_classes = data.num_classes();
  ClassSummary summary;
  summary.means.assign(num_classes, Eigen::VectorXd::Zero(data.dim()));
  summary.counts.assign(num_classes, 0);
  for (Eigen::Index k = 0; k < data.samples.rows(); ++k) {
    const std::size_t c = data.labels[static_cast<std::size_t>(k)];
    summary.means[c] += data.samples.row(k).transpose();
    ++summary.counts[c];
  }
  summary.mean_of_means = Eigen::VectorXd::Zero(data.dim());
  for (std::size_t c = 0; c < num_classes; ++c) {
    summary.means[c] /= static_cast<double>(summary.counts[c]);
    summary.mean_of_means += summary.means[c];
  }
  summary.mean_of_means /= static_cast<double>(num_classes);
  return summary;
}

inline ScatterPair compute_scatter(const LabeledPoseSet& data) {
  const ClassSummary summary = summarize_classes(data);
  const Eigen::Index dim = data.dim();

  // Center each sample on its class mean, then one rank-k update.
  Eigen::MatrixXd centered(data.samples.rows(), dim);
  for (Eigen::Index k = 0; k < data.samples.rows(); ++k) {
    centered.row(k) = data.samples.row(k) - summary.means[data.labels[static_cast<std::size_t>(k)]].transpose();
  }
  ScatterPair scatter;
  scatter.within = centered.transpose() * centered;

  scatter.between = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t c = 0; c < summary.means.size(); ++c) {
    const Eigen::VectorXd d = summary.means[c] - summary.mean_of_means;
    scatter.between.noalias() += static_cast<double>(summary.counts[c]) * d * d.transpose();
  }
  // Exact symmetry for downstream solvers.
  scatter.within = 0.5 * (scatter.within + scatter.within.transpose()).eval();
  scatter.between = 0.5 * (scatter.between + scatter.between.transpose()).eval();
  return scatter;
}

struct FisherOptions {
  /// Ridge added to S_w; defaults to 1e-6 * trace(S_w) / dim.
  std::optional<double> ridge;
  /// Class covariances in Fisher space get scale * trace / (C-1) on the diagonal.
  double covariance_ridge_scale = 1e-8;
  /// Absolute lower bound on the covariance ridge so zero-spread classes stay invertible.
  double min_covariance_ridge = 1e-12;
};

struct FisherModel {
  Eigen::MatrixXd projection;  // dim x (C-1)
  Eigen::VectorXd eigenvalues;  // nonincreasing
  std::vector<std::string> class_names;
  std::vector<Eigen::VectorXd> class_means;
  std::vector<Eigen::MatrixXd> class_covariances;  // regularized
  std::vector<Eigen::MatrixXd> class_cov_inverses;
  double ridge = 0.0;
  std::vector<double> covariance_ridges;
  /// Number of eigenvalues above 1e-10 of the largest; below C-1 the trailing
  /// directions carry no between-class spread.
  std::size_t effective_rank = 0;

  std::size_t num_classes() const { return class_names.size(); }
  Eigen::Index input_dim() const { return projection.rows(); }
  Eigen::Index output_dim() const { return projection.cols(); }
};

inline Eigen::VectorXd project(const FisherModel& model, const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != model.input_dim()) {
    throw InputError("projection expects dimension " + std::to_string(model.input_dim()) + ", got " +
                     std::to_string(v.size()));
  }
  return model.projection.transpose() * v;
}

namespace detail {

inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12) {
      if (v[i] < 0) v = -v;
      return;
    }
  }
}

/// Regularizes `cov` in place and returns its inverse, throwing if it stays singular.
inline Eigen::MatrixXd regularized_inverse(Eigen::MatrixXd& cov, double ridge, const std::string& what) {
  cov.diagonal().array() += ridge;
  const Eigen::Index n = cov.rows();
  Eigen::MatrixXd inverse = cov.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
  const double residual = (cov * inverse - Eigen::MatrixXd::Identity(n, n)).norm();
  if (!inverse.allFinite() || !(residual <= 1e-6)) {
    throw SingularityError(what + " covariance is singular after regularization (residual " +
                           std::to_string(residual) + ")");
  }
  return 0.5 * (inverse + inverse.transpose());
}

}  // namespace detail

inline FisherModel fit_fisher(const LabeledPoseSet& data, const FisherOptions& options = {}) {
  const ScatterPair scatter = compute_scatter(data);
  const std::size_t num_classes = data.num_classes();
  const Eigen::Index dim = data.dim();
  const Eigen::Index out_dim = static_cast<Eigen::Index>(num_classes) - 1;
  if (out_dim > dim) {
    throw ConfigError(std::to_string(num_classes) + " classes need at least " + std::to_string(out_dim) +
                      " input dimensions");
  }

  const double ridge = options.ridge.value_or(1e-6 * scatter.within.trace() / static_cast<double>(dim));
  if (ridge < 0 || !std::isfinite(ridge)) throw ConfigError("ridge must be finite and >= 0");

  Eigen::MatrixXd within = scatter.within;
  within.diagonal().array() += ridge;
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> check(within, Eigen::EigenvaluesOnly);
    const double lo = check.eigenvalues().minCoeff();
    const double hi = check.eigenvalues().maxCoeff();
    if (!(hi > 0) || !(lo > 1e-12 * hi)) {
      throw SingularityError("within-class scatter is singular (ridge " + std::to_string(ridge) +
                             "); increase the ridge parameter");
    }
  }

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(scatter.between, within,
                                                                    Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success) throw SingularityError("generalized eigen solver failed");

  // Eigen returns ascending eigenvalues; take the top C-1 in descending order.
  FisherModel model;
  model.class_names = data.class_names;
  model.ridge = ridge;
  model.projection.resize(dim, out_dim);
  model.eigenvalues.resize(out_dim);
  for (Eigen::Index j = 0; j < out_dim; ++j) {
    const Eigen::Index src = dim - 1 - j;
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    v.normalize();
    detail::fix_sign(v);
    model.projection.col(j) = v;
    model.eigenvalues[j] = solver.eigenvalues()[src];
  }
  const double top = out_dim > 0 ? std::max(model.eigenvalues[0], 0.0) : 0.0;
  model.effective_rank = static_cast<std::size_t>(
      (model.eigenvalues.array() > 1e-10 * top).count());
  if (top == 0.0) model.effective_rank = 0;

  // Per-class statistics in Fisher space.
  const Eigen::MatrixXd projected = data.samples * model.projection;
  model.class_means.assign(num_classes, Eigen::VectorXd::Zero(out_dim));
  std::vector<std::size_t> counts(num_classes, 0);
  for (Eigen::Index k = 0; k < projected.rows(); ++k) {
    const std::size_t c = data.labels[static_cast<std::size_t>(k)];
    model.class_means[c] += projected.row(k).transpose();
    ++counts[c];
  }
  for (std::size_t c = 0; c < num_classes; ++c) model.class_means[c] /= static_cast<double>(counts[c]);

  model.class_covariances.assign(num_classes, Eigen::MatrixXd::Zero(out_dim, out_dim));
  for (Eigen::Index k = 0; k < projected.rows(); ++k) {
    const std::size_t c = data.labels[static_cast<std::size_t>(k)];
    const Eigen::VectorXd d = projected.row(k).transpose() - model.class_means[c];
    model.class_covariances[c].noalias() += d * d.transpose();
  }
  model.class_cov_inverses.resize(num_classes);
  model.covariance_ridges.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& cov = model.class_covariances[c];
    cov /= static_cast<double>(counts[c] - 1);
    cov = 0.5 * (cov + cov.transpose()).eval();
    const double cov_ridge = std::max(options.covariance_ridge_scale * cov.trace() / static_cast<double>(out_dim),
                                      options.min_covariance_ridge);
    model.covariance_ridges[c] = cov_ridge;
    model.class_cov_inverses[c] = detail::regularized_inverse(cov, cov_ridge, "class '" + data.class_names[c] + "'");
  }
  return model;
}

}  // namespace bodystate
