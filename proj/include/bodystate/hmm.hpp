#pragma once

// Discrete-emission hidden Markov models over body-state symbols: forward
// scoring, Baum-Welch training with random restarts, and a per-action bank
// recognized by maximum likelihood.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bodystate/detail/random.hpp"
#include "bodystate/errors.hpp"
#include "bodystate/state_classifier.hpp"

namespace bodystate {

using SymbolSequence = std::vector<std::size_t>;

inline const std::vector<std::string>& default_action_names() {
  static const std::vector<std::string> names = {
      "sit", "grasp", "walk", "lay", "fall_front", "fall_back", "fall_side", "end_up_sit",
  };
  return names;
}

inline const std::vector<std::string>& default_fall_actions() {
  static const std::vector<std::string> names = {"fall_front", "fall_back", "fall_side", "end_up_sit"};
  return names;
}

struct TrainingInfo {
  std::uint64_t seed = 0;
  std::size_t restarts = 0;
  std::size_t best_restart = 0;
  std::size_t iterations = 0;
  bool converged = false;
  double log_likelihood = 0.0;
  /// Total corpus log-likelihood before each M-step of the winning restart,
  /// followed by that of the returned parameters.
  std::vector<double> log_likelihood_history;
};

struct DiscreteHmm {
  Eigen::VectorXd initial;     // pi
  Eigen::MatrixXd transition;  // A, rows sum to one
  Eigen::MatrixXd emission;    // B, hidden x symbols
  TrainingInfo training;

  std::size_t num_hidden() const { return static_cast<std::size_t>(initial.size()); }
  std::size_t num_symbols() const { return static_cast<std::size_t>(emission.cols()); }
};

inline void validate_hmm(const DiscreteHmm& hmm, double tol = 1e-9) {
  const Eigen::Index n = hmm.initial.size();
  if (n == 0 || hmm.transition.rows() != n || hmm.transition.cols() != n || hmm.emission.rows() != n ||
      hmm.emission.cols() == 0) {
    throw InputError("inconsistent HMM dimensions");
  }
  auto check_row = [&](const Eigen::Ref<const Eigen::RowVectorXd>& row, const char* what) {
    if (!row.allFinite() || (row.array() < 0).any() || std::abs(row.sum() - 1.0) > tol) {
      throw InputError(std::string(what) + " is not a probability distribution");
    }
  };
  check_row(hmm.initial.transpose(), "initial distribution");
  for (Eigen::Index i = 0; i < n; ++i) {
    check_row(hmm.transition.row(i), "transition row");
    check_row(hmm.emission.row(i), "emission row");
  }
}

/// Keeps every factor-th element starting at index 0.
template <class T>
std::vector<T> downsample(const std::vector<T>& seq, std::size_t factor) {
  if (factor == 0) throw ConfigError("downsample factor must be >= 1");
  std::vector<T> out;
  out.reserve((seq.size() + factor - 1) / factor);
  for (std::size_t i = 0; i < seq.size(); i += factor) out.push_back(seq[i]);
  return out;
}

inline StateSequence downsample(const StateSequence& seq, std::size_t factor) {
  StateSequence out;
  out.source_id = seq.source_id;
  out.labels = downsample(seq.labels, factor);
  out.frame_indices = downsample(seq.frame_indices, factor);
  out.skipped = seq.skipped;
  return out;
}

/// Pads by repeating the final element up to `target`; never truncates.
template <class T>
std::vector<T> equalize_length(const std::vector<T>& seq, std::size_t target) {
  if (seq.empty()) throw EmptySequenceError("cannot equalize an empty sequence");
  if (target < seq.size()) {
    throw ConfigError("equalization target " + std::to_string(target) + " is shorter than the sequence (" +
                      std::to_string(seq.size()) + ")");
  }
  std::vector<T> out = seq;
  out.resize(target, seq.back());
  return out;
}

inline StateSequence equalize_length(const StateSequence& seq, std::size_t target) {
  StateSequence out = seq;
  out.labels = equalize_length(seq.labels, target);
  out.frame_indices = equalize_length(seq.frame_indices, target);
  return out;
}

namespace detail {

inline double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double m = x.maxCoeff();
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log((x.array() - m).exp().sum());
}

inline void check_symbols(std::span<const std::size_t> obs, std::size_t num_symbols) {
  if (obs.empty()) throw EmptySequenceError("observation sequence is empty");
  for (std::size_t o : obs) {
    if (o >= num_symbols) {
      throw InputError("symbol " + std::to_string(o) + " out of range (" + std::to_string(num_symbols) +
                       " symbols)");
    }
  }
}

}  // namespace detail

/// log P(obs | hmm) by the forward recursion carried out entirely in log space.
inline double forward_log_likelihood(const DiscreteHmm& hmm, std::span<const std::size_t> obs) {
  detail::check_symbols(obs, hmm.num_symbols());
  const Eigen::Index n = hmm.initial.size();
  const Eigen::VectorXd log_pi = hmm.initial.array().log();
  const Eigen::MatrixXd log_a = hmm.transition.array().log();
  const Eigen::MatrixXd log_b = hmm.emission.array().log();

  Eigen::VectorXd alpha = log_pi + log_b.col(static_cast<Eigen::Index>(obs[0]));
  Eigen::VectorXd next(n);
  for (std::size_t t = 1; t < obs.size(); ++t) {
    for (Eigen::Index j = 0; j < n; ++j) {
      next[j] = detail::log_sum_exp(alpha + log_a.col(j)) + log_b(j, static_cast<Eigen::Index>(obs[t]));
    }
    alpha.swap(next);
  }
  return detail::log_sum_exp(alpha);
}

struct BaumWelchConfig {
  std::size_t num_hidden = 3;
  std::size_t max_iters = 200;
  double tol = 1e-6;
  std::size_t restarts = 10;
  std::uint64_t seed = 0;
  /// Lower bound enforced on every emission probability.
  double emission_floor = 1e-6;
  /// Run restarts on separate threads.
  bool parallel = true;
};

namespace detail {

/// argmax sum_k counts_k log b_k subject to b_k >= floor and sum b = 1.
/// Returns false (leaving `row` untouched) when the row carries no mass.
inline bool floored_normalize(const Eigen::Ref<const Eigen::RowVectorXd>& counts, double floor,
                              Eigen::RowVectorXd& row) {
  const Eigen::Index k = counts.size();
  if (!(counts.sum() > 0)) return false;
  std::vector<bool> pinned(static_cast<std::size_t>(k), false);
  std::size_t num_pinned = 0;
  Eigen::RowVectorXd out(k);
  for (;;) {
    double free_counts = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (!pinned[static_cast<std::size_t>(i)]) free_counts += counts[i];
    }
    const double free_mass = 1.0 - floor * static_cast<double>(num_pinned);
    bool changed = false;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (pinned[static_cast<std::size_t>(i)]) {
        out[i] = floor;
        continue;
      }
      out[i] = free_mass * counts[i] / free_counts;
      if (out[i] < floor) {
        pinned[static_cast<std::size_t>(i)] = true;
        ++num_pinned;
        changed = true;
      }
    }
    if (!changed) break;
  }
  row = out;
  return true;
}

inline Eigen::RowVectorXd dirichlet_one(Rng& rng, Eigen::Index k) {
  std::exponential_distribution<double> exp1(1.0);
  Eigen::RowVectorXd row(k);
  for (Eigen::Index i = 0; i < k; ++i) row[i] = exp1(rng) + std::numeric_limits<double>::min();
  return row / row.sum();
}

struct SufficientStats {
  Eigen::VectorXd initial;
  Eigen::MatrixXd transition;
  Eigen::MatrixXd emission;
  double log_likelihood = 0.0;
};

/// Scaled forward-backward over the corpus; the likelihood is accumulated as a
/// sum of log scale factors.
inline SufficientStats expectation(const DiscreteHmm& hmm, const std::vector<SymbolSequence>& seqs) {
  const std::size_t n = static_cast<std::size_t>(hmm.initial.size());
  const std::size_t m = static_cast<std::size_t>(hmm.emission.cols());
  SufficientStats stats{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)),
                        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)),
                        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)), 0.0};
  // Plain loops over column-major storage: the models are tiny, so per-call
  // Eigen overhead would dominate.
  const Eigen::MatrixXd a_mat = hmm.transition;
  const Eigen::MatrixXd b_mat = hmm.emission;
  const double* a = a_mat.data();  // a[i + j*n] = A(i, j)
  const double* b = b_mat.data();  // b[i + k*n] = B(i, k)
  double* xi = stats.transition.data();
  double* em = stats.emission.data();

  std::vector<double> alpha, beta, scale, right(n);
  for (const SymbolSequence& obs : seqs) {
    const std::size_t len = obs.size();
    alpha.assign(n * len, 0.0);
    beta.assign(n * len, 0.0);
    scale.assign(len, 0.0);

    double s0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) s0 += alpha[i] = hmm.initial[static_cast<Eigen::Index>(i)] * b[i + obs[0] * n];
    scale[0] = s0;
    for (std::size_t i = 0; i < n; ++i) alpha[i] /= s0;
    for (std::size_t t = 1; t < len; ++t) {
      const double* prev = &alpha[(t - 1) * n];
      double* cur = &alpha[t * n];
      const double* bt = b + obs[t] * n;
      double st = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += prev[i] * a[i + j * n];
        st += cur[j] = acc * bt[j];
      }
      scale[t] = st;
      const double inv = 1.0 / st;
      for (std::size_t j = 0; j < n; ++j) cur[j] *= inv;
    }

    for (std::size_t i = 0; i < n; ++i) beta[(len - 1) * n + i] = 1.0;
    for (std::size_t t = len - 1; t-- > 0;) {
      const double* next = &beta[(t + 1) * n];
      const double* bt = b + obs[t + 1] * n;
      const double inv = 1.0 / scale[t + 1];
      for (std::size_t j = 0; j < n; ++j) right[j] = bt[j] * next[j] * inv;
      const double* at = &alpha[t * n];
      double* cur = &beta[t * n];
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          acc += a[i + j * n] * right[j];
          xi[i + j * n] += at[i] * right[j];
        }
        cur[i] = acc;
      }
    }

    for (std::size_t t = 0; t < len; ++t) stats.log_likelihood += std::log(scale[t]);
    for (std::size_t i = 0; i < n; ++i) stats.initial[static_cast<Eigen::Index>(i)] += alpha[i] * beta[i];
    for (std::size_t t = 0; t < len; ++t) {
      double* col = em + obs[t] * n;
      for (std::size_t i = 0; i < n; ++i) col[i] += alpha[t * n + i] * beta[t * n + i];
    }
  }
  stats.transition = stats.transition.cwiseProduct(hmm.transition);
  return stats;
}

inline void maximization(const SufficientStats& stats, double floor, DiscreteHmm& hmm) {
  hmm.initial = stats.initial / stats.initial.sum();
  for (Eigen::Index i = 0; i < hmm.transition.rows(); ++i) {
    const double mass = stats.transition.row(i).sum();
    if (mass > 0) hmm.transition.row(i) = stats.transition.row(i) / mass;
    Eigen::RowVectorXd row;
    if (floored_normalize(stats.emission.row(i), floor, row)) hmm.emission.row(i) = row;
  }
}

inline DiscreteHmm random_hmm(std::size_t num_hidden, std::size_t num_symbols, double floor, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(num_hidden);
  const auto m = static_cast<Eigen::Index>(num_symbols);
  DiscreteHmm hmm;
  hmm.initial = dirichlet_one(rng, n).transpose();
  hmm.transition.resize(n, n);
  hmm.emission.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) hmm.transition.row(i) = dirichlet_one(rng, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd row;
    floored_normalize(dirichlet_one(rng, m), floor, row);
    hmm.emission.row(i) = row;
  }
  return hmm;
}

inline DiscreteHmm train_single_restart(const std::vector<SymbolSequence>& seqs, std::size_t num_symbols,
                                        const BaumWelchConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  DiscreteHmm hmm = random_hmm(config.num_hidden, num_symbols, config.emission_floor, rng);
  TrainingInfo info;
  info.seed = seed;
  double previous = -std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < config.max_iters; ++it) {
    const SufficientStats stats = expectation(hmm, seqs);
    info.log_likelihood_history.push_back(stats.log_likelihood);
    if (it > 0 && std::abs(stats.log_likelihood - previous) < config.tol) {
      info.converged = true;
      break;
    }
    previous = stats.log_likelihood;
    maximization(stats, config.emission_floor, hmm);
    info.iterations = it + 1;
  }
  if (!info.converged) info.log_likelihood_history.push_back(expectation(hmm, seqs).log_likelihood);
  info.log_likelihood = info.log_likelihood_history.back();
  hmm.training = std::move(info);
  return hmm;
}

}  // namespace detail

/// Expectation-maximization from `restarts` seeded Dirichlet(1) initializations;
/// the restart with the highest final corpus log-likelihood wins (ties: lowest index).
inline DiscreteHmm baum_welch_train(const std::vector<SymbolSequence>& seqs, std::size_t num_symbols,
                                    const BaumWelchConfig& config) {
  if (seqs.empty()) throw TrainingDataError("no training sequences");
  for (const auto& s : seqs) detail::check_symbols(s, num_symbols);
  if (config.num_hidden == 0) throw ConfigError("num_hidden must be >= 1");
  if (config.restarts == 0) throw ConfigError("restarts must be >= 1");
  if (config.max_iters == 0) throw ConfigError("max_iters must be >= 1");
  if (!(config.emission_floor >= 0) || config.emission_floor * static_cast<double>(num_symbols) >= 1.0) {
    throw ConfigError("emission floor must lie in [0, 1/num_symbols)");
  }

  std::vector<DiscreteHmm> candidates(config.restarts);
  auto run = [&](std::size_t r) {
    return detail::train_single_restart(seqs, num_symbols, config, detail::derive_seed(config.seed, {r}));
  };
  if (config.parallel && config.restarts > 1) {
    std::vector<std::future<DiscreteHmm>> jobs;
    for (std::size_t r = 0; r < config.restarts; ++r) jobs.push_back(std::async(std::launch::async, run, r));
    for (std::size_t r = 0; r < config.restarts; ++r) candidates[r] = jobs[r].get();
  } else {
    for (std::size_t r = 0; r < config.restarts; ++r) candidates[r] = run(r);
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < candidates.size(); ++r) {
    if (candidates[r].training.log_likelihood > candidates[best].training.log_likelihood) best = r;
  }
  DiscreteHmm result = std::move(candidates[best]);
  result.training.best_restart = best;
  result.training.restarts = config.restarts;
  result.training.seed = config.seed;
  return result;
}

struct PreprocessConfig {
  std::size_t downsample_factor = 5;
  /// Pad training sequences of each action to that action's longest one.
  bool equalize_training_lengths = true;
};

struct ActionModelBank {
  std::vector<std::string> action_names;
  std::vector<DiscreteHmm> models;
  std::size_t num_symbols = 0;
  PreprocessConfig preprocess;
  BaumWelchConfig training;

  std::size_t num_actions() const { return action_names.size(); }
};

/// Downsamples, equalizes (per action) and trains one HMM per action. `per_action[a]`
/// holds full-rate state-label sequences of action a.
inline ActionModelBank train_action_bank(const std::vector<std::vector<SymbolSequence>>& per_action,
                                         const std::vector<std::string>& action_names, std::size_t num_symbols,
                                         const PreprocessConfig& preprocess, const BaumWelchConfig& config) {
  if (per_action.size() != action_names.size()) throw InputError("one sequence list per action is required");
  if (action_names.empty()) throw ConfigError("no actions to train");
  ActionModelBank bank;
  bank.action_names = action_names;
  bank.num_symbols = num_symbols;
  bank.preprocess = preprocess;
  bank.training = config;
  for (std::size_t a = 0; a < per_action.size(); ++a) {
    if (per_action[a].empty()) throw TrainingDataError("action '" + action_names[a] + "' has no training sequences");
    std::vector<SymbolSequence> prepared;
    std::size_t longest = 0;
    for (const auto& seq : per_action[a]) {
      if (seq.empty()) throw EmptySequenceError("empty training sequence for action '" + action_names[a] + "'");
      prepared.push_back(downsample(seq, preprocess.downsample_factor));
      longest = std::max(longest, prepared.back().size());
    }
    if (preprocess.equalize_training_lengths) {
      for (auto& seq : prepared) seq = equalize_length(seq, longest);
    }
    BaumWelchConfig action_config = config;
    action_config.seed = detail::derive_seed(config.seed, {0xac7104ULL, a});
    bank.models.push_back(baum_welch_train(prepared, num_symbols, action_config));
  }
  return bank;
}

struct ActionDecision {
  std::size_t label = 0;
  Eigen::VectorXd log_likelihoods;
};

/// Maximum-likelihood action for an already preprocessed symbol sequence.
inline ActionDecision recognize_action(const ActionModelBank& bank, std::span<const std::size_t> seq) {
  if (bank.models.empty()) throw ConfigError("model bank is empty");
  if (seq.empty()) throw EmptySequenceError("cannot recognize an empty sequence");
  ActionDecision decision;
  decision.log_likelihoods.resize(static_cast<Eigen::Index>(bank.models.size()));
  for (std::size_t a = 0; a < bank.models.size(); ++a) {
    decision.log_likelihoods[static_cast<Eigen::Index>(a)] = forward_log_likelihood(bank.models[a], seq);
  }
  for (std::size_t a = 1; a < bank.models.size(); ++a) {
    if (decision.log_likelihoods[static_cast<Eigen::Index>(a)] >
        decision.log_likelihoods[static_cast<Eigen::Index>(decision.label)]) {
      decision.label = a;
    }
  }
  return decision;
}

/// Applies the bank's recognition-time preprocessing (downsampling only).
inline SymbolSequence prepare_for_recognition(const ActionModelBank& bank, const SymbolSequence& full_rate) {
  return downsample(full_rate, bank.preprocess.downsample_factor);
}

}  // namespace bodystate
