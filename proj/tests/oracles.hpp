#pragma once

// Test-only reference computations. These deliberately avoid the library's
// code paths: plain loops, exhaustive enumeration, explicit rotation matrices.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "bodystate/hmm.hpp"
#include "bodystate/lda.hpp"
#include "bodystate/skeleton.hpp"

namespace oracle {

/// P(obs | hmm) summed over every hidden path, in plain probability space.
inline double path_sum_likelihood(const bodystate::DiscreteHmm& hmm, const std::vector<std::size_t>& obs) {
  const std::size_t n = hmm.num_hidden();
  const std::size_t t_len = obs.size();
  std::size_t paths = 1;
  for (std::size_t t = 0; t < t_len; ++t) paths *= n;
  double total = 0.0;
  std::vector<std::size_t> path(t_len);
  for (std::size_t code = 0; code < paths; ++code) {
    std::size_t c = code;
    for (std::size_t t = 0; t < t_len; ++t) {
      path[t] = c % n;
      c /= n;
    }
    double p = hmm.initial[static_cast<Eigen::Index>(path[0])] *
               hmm.emission(static_cast<Eigen::Index>(path[0]), static_cast<Eigen::Index>(obs[0]));
    for (std::size_t t = 1; t < t_len; ++t) {
      p *= hmm.transition(static_cast<Eigen::Index>(path[t - 1]), static_cast<Eigen::Index>(path[t])) *
           hmm.emission(static_cast<Eigen::Index>(path[t]), static_cast<Eigen::Index>(obs[t]));
    }
    total += p;
  }
  return total;
}

inline Eigen::VectorXd random_distribution(std::mt19937_64& rng, Eigen::Index k) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::VectorXd v(k);
  for (Eigen::Index i = 0; i < k; ++i) v[i] = u(rng);
  return v / v.sum();
}

inline bodystate::DiscreteHmm random_hmm(std::mt19937_64& rng, std::size_t hidden, std::size_t symbols) {
  const auto n = static_cast<Eigen::Index>(hidden);
  const auto m = static_cast<Eigen::Index>(symbols);
  bodystate::DiscreteHmm h;
  h.initial = random_distribution(rng, n);
  h.transition.resize(n, n);
  h.emission.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    h.transition.row(i) = random_distribution(rng, n).transpose();
    h.emission.row(i) = random_distribution(rng, m).transpose();
  }
  return h;
}

inline std::size_t draw(std::mt19937_64& rng, const Eigen::Ref<const Eigen::RowVectorXd>& p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    x -= p[i];
    if (x < 0) return static_cast<std::size_t>(i);
  }
  return static_cast<std::size_t>(p.size() - 1);
}

/// Ancestral sampling of one observation sequence.
inline std::vector<std::size_t> sample(std::mt19937_64& rng, const bodystate::DiscreteHmm& h, std::size_t len) {
  std::vector<std::size_t> obs(len);
  std::size_t s = draw(rng, h.initial.transpose());
  for (std::size_t t = 0; t < len; ++t) {
    obs[t] = draw(rng, h.emission.row(static_cast<Eigen::Index>(s)));
    s = draw(rng, h.transition.row(static_cast<Eigen::Index>(s)));
  }
  return obs;
}

struct NaiveScatter {
  Eigen::MatrixXd within;
  Eigen::MatrixXd between;
};

/// Element-by-element double loop over the scatter definitions.
inline NaiveScatter naive_scatter(const bodystate::LabeledPoseSet& data) {
  const std::size_t c_count = data.num_classes();
  const auto d = static_cast<std::size_t>(data.dim());
  const auto n = static_cast<std::size_t>(data.samples.rows());
  std::vector<std::vector<double>> mean(c_count, std::vector<double>(d, 0.0));
  std::vector<double> count(c_count, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    count[data.labels[k]] += 1.0;
    for (std::size_t a = 0; a < d; ++a) mean[data.labels[k]][a] += data.samples(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a));
  }
  for (std::size_t c = 0; c < c_count; ++c)
    for (std::size_t a = 0; a < d; ++a) mean[c][a] /= count[c];
  std::vector<double> mom(d, 0.0);
  for (std::size_t c = 0; c < c_count; ++c)
    for (std::size_t a = 0; a < d; ++a) mom[a] += mean[c][a] / static_cast<double>(c_count);

  NaiveScatter s{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)),
                 Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))};
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      double w = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t c = data.labels[k];
        w += (data.samples(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a)) - mean[c][a]) *
             (data.samples(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(b)) - mean[c][b]);
      }
      double bt = 0.0;
      for (std::size_t c = 0; c < c_count; ++c) bt += count[c] * (mean[c][a] - mom[a]) * (mean[c][b] - mom[b]);
      s.within(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = w;
      s.between(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = bt;
    }
  }
  return s;
}

/// Right-handed rotation matrix about +y.
inline Eigen::Matrix3d rotation_y(double theta) {
  Eigen::Matrix3d r;
  r << std::cos(theta), 0, std::sin(theta), 0, 1, 0, -std::sin(theta), 0, std::cos(theta);
  return r;
}

inline bodystate::SelectedJoints transform(const bodystate::SelectedJoints& s, const Eigen::Matrix3d& r,
                                           const Eigen::Vector3d& t) {
  bodystate::SelectedJoints out = s;
  for (auto& j : out.feature_joints) j = r * j + t;
  out.hip = r * s.hip + t;
  out.left_shoulder = r * s.left_shoulder + t;
  out.right_shoulder = r * s.right_shoulder + t;
  return out;
}

inline bodystate::SelectedJoints random_selected(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  bodystate::SelectedJoints s;
  for (auto& j : s.feature_joints) j = Eigen::Vector3d(u(rng), u(rng), u(rng));
  s.hip = Eigen::Vector3d(u(rng), u(rng), u(rng));
  // Keep the shoulders well separated in xz.
  const double a = 3.14159265358979 * u(rng);
  const double half = 0.1 + 0.1 * (u(rng) + 1.0);
  const Eigen::Vector3d mid(u(rng), u(rng), u(rng));
  s.left_shoulder = mid - Eigen::Vector3d(half * std::cos(a), 0.05 * u(rng), half * std::sin(a));
  s.right_shoulder = mid + Eigen::Vector3d(half * std::cos(a), 0.05 * u(rng), half * std::sin(a));
  return s;
}

inline double max_abs_diff(const bodystate::AlignedPose& a, const bodystate::AlignedPose& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.feature_joints.size(); ++i)
    m = std::max(m, (a.feature_joints[i] - b.feature_joints[i]).cwiseAbs().maxCoeff());
  m = std::max(m, (a.left_shoulder - b.left_shoulder).cwiseAbs().maxCoeff());
  m = std::max(m, (a.right_shoulder - b.right_shoulder).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace oracle
