#pragma once

// Closed-form inference of the background knowledge K by direct maximization
// of the summed summary score, regularized toward a prior:
//
//   F(K) = sum_i theta_K(D_i, S_i) - gamma * sum_i R_i(K)
//
// Uniform prior:  K_j proportional to sum_i (gamma - S_ij)
// Document prior: K_j proportional to sum_i (gamma * D_ij - S_ij)
//
// `maximize_fms_numeric` climbs F directly and exists to check both formulas.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "klearn/corpus.hpp"
#include "klearn/distribution.hpp"
#include "klearn/error.hpp"
#include "klearn/pairs.hpp"
#include "klearn/scoring.hpp"

namespace klearn {

enum class Prior { uniform, document };

struct ClosedFormConfig {
  double gamma = 1.0;
  // Document prior only: use 1.01 times the smallest admissible gamma.
  bool gamma_auto = false;
  Prior prior = Prior::uniform;
  SmoothingConfig smoothing;
};

/// Smallest gamma keeping every document-prior term nonnegative: the maximum
/// over pairs and units of S~_j / D~_j on smoothed distributions.
inline double document_prior_gamma_bound(const std::vector<SummaryPair>& pairs,
                                         const SmoothingConfig& smoothing) {
  double bound = 0.0;
  for (const auto& p : pairs) {
    const auto d = smoothed(p.document.probs(), smoothing);
    const auto s = smoothed(p.summary.probs(), smoothing);
    for (std::size_t j = 0; j < d.size(); ++j) bound = std::max(bound, s[j] / d[j]);
  }
  return bound;
}

inline double document_prior_gamma_bound(const Dataset& dataset, const Vocabulary& vocab,
                                         const SmoothingConfig& smoothing,
                                         const TokenizerConfig& tokenizer = {}) {
  return document_prior_gamma_bound(reference_pairs(dataset, vocab, tokenizer), smoothing);
}

inline KnowledgeModel infer_ms_u(const std::vector<SummaryPair>& pairs, const Vocabulary& vocab,
                                 const ClosedFormConfig& config) {
  if (config.prior != Prior::uniform) throw PreconditionError("ms-u requires the uniform prior");
  if (!(config.gamma >= 1.0)) throw PreconditionError("ms-u requires gamma >= 1");
  if (pairs.empty()) throw PreconditionError("ms-u needs at least one document-summary pair");
  const std::size_t n = vocab.size();
  std::vector<double> w(n, 0.0);
  for (const auto& p : pairs) {
    detail::require_same_length(p.summary.size(), n);
    for (std::size_t j = 0; j < n; ++j) w[j] += config.gamma - p.summary[j];
  }
  for (double& x : w) x = std::max(x, 0.0);
  Provenance prov;
  prov.algorithm = "ms-u";
  prov.hyperparams = {{"gamma", config.gamma}, {"prior", "uniform"}};
  prov.data_slice = std::to_string(pairs.size()) + " pairs";
  auto k = std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })
               ? UnitDistribution::uniform(n)
               : UnitDistribution::from_weights(w);
  return KnowledgeModel(std::move(k), vocab, std::move(prov));
}

inline KnowledgeModel infer_ms_u(const Dataset& dataset, const Vocabulary& vocab,
                                 const ClosedFormConfig& config, const TokenizerConfig& tokenizer = {}) {
  return infer_ms_u(reference_pairs(dataset, vocab, tokenizer), vocab, config);
}

// Terms are accumulated on smoothed distributions so the admissibility bound
// above guarantees every term is nonnegative.
inline KnowledgeModel infer_ms_d(const std::vector<SummaryPair>& pairs, const Vocabulary& vocab,
                                 const ClosedFormConfig& config) {
  if (config.prior != Prior::document) throw PreconditionError("ms-d requires the document prior");
  if (pairs.empty()) throw PreconditionError("ms-d needs at least one document-summary pair");
  config.smoothing.validate();
  const double bound = document_prior_gamma_bound(pairs, config.smoothing);
  double gamma = config.gamma;
  if (config.gamma_auto) {
    gamma = 1.01 * bound;
  } else if (!(gamma >= bound)) {
    throw PreconditionError("gamma " + std::to_string(gamma) +
                            " is too small for this dataset; positivity requires gamma >= " +
                            std::to_string(bound));
  }
  const std::size_t n = vocab.size();
  std::vector<double> w(n, 0.0);
  for (const auto& p : pairs) {
    detail::require_same_length(p.summary.size(), n);
    const auto d = smoothed(p.document.probs(), config.smoothing);
    const auto s = smoothed(p.summary.probs(), config.smoothing);
    for (std::size_t j = 0; j < n; ++j) w[j] += gamma * d[j] - s[j];
  }
  for (double& x : w) {
    if (x < 0.0) {
      if (x < -1e-12) throw PreconditionError("ms-d produced a negative mass; gamma too small");
      x = 0.0;
    }
  }
  Provenance prov;
  prov.algorithm = "ms-d";
  prov.hyperparams = {{"gamma", gamma},
                      {"gamma_auto", config.gamma_auto},
                      {"gamma_bound", bound},
                      {"prior", "document"},
                      {"epsilon", config.smoothing.epsilon}};
  prov.data_slice = std::to_string(pairs.size()) + " pairs";
  auto k = std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })
               ? UnitDistribution::uniform(n)
               : UnitDistribution::from_weights(w);
  return KnowledgeModel(std::move(k), vocab, std::move(prov));
}

inline KnowledgeModel infer_ms_d(const Dataset& dataset, const Vocabulary& vocab,
                                 const ClosedFormConfig& config, const TokenizerConfig& tokenizer = {}) {
  return infer_ms_d(reference_pairs(dataset, vocab, tokenizer), vocab, config);
}

// ---------------------------------------------------------------------------
// Numeric oracle

struct OracleBudget {
  int restarts = 20;
  int max_iterations = 3000;
  std::uint64_t seed = 7;
};

namespace detail {

// Euclidean projection onto the probability simplex (sort-based).
inline std::vector<double> project_to_simplex(std::vector<double> v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, tau = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumulative += u[i];
    const double t = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) tau = t;
  }
  for (double& x : v) x = std::max(x - tau, 0.0);
  return v;
}

}  // namespace detail

/// The regularized objective evaluated through the public score functions.
/// For the uniform prior the per-pair regularizer is the cross-entropy
/// against the all-ones measure, n * KL(U||K) up to a constant.
inline double fms_objective(const std::vector<SummaryPair>& pairs, const UnitDistribution& k,
                            double gamma, Prior prior, const ScoringConfig& scoring) {
  const std::size_t n = k.size();
  const auto uniform = UnitDistribution::uniform(n);
  double f = 0.0;
  for (const auto& p : pairs) {
    f += theta(p.summary, p.document, k, scoring);
    if (prior == Prior::uniform)
      f -= gamma * static_cast<double>(n) * kl(uniform, k, scoring.smoothing);
    else
      f -= gamma * kl(p.document, k, scoring.smoothing);
  }
  return f;
}

/// Maximizes the regularized objective by projected gradient ascent with
/// Barzilai-Borwein steps, Armijo backtracking and finite-difference
/// gradients along simplex-tangent directions. Desk-scale only (n <= 8).
inline UnitDistribution maximize_fms_numeric(const std::vector<SummaryPair>& pairs, std::size_t n,
                                             double gamma, Prior prior, const OracleBudget& budget = {},
                                             const SmoothingConfig& smoothing = {}) {
  if (n > 8) throw PreconditionError("numeric oracle supports at most 8 units");
  if (n == 0) throw PreconditionError("empty vocabulary");
  if (n == 1) return UnitDistribution::uniform(1);
  ScoringConfig scoring;
  scoring.smoothing = smoothing;

  auto objective = [&](const std::vector<double>& x) {
    return fms_objective(pairs, UnitDistribution::from_weights(x), gamma, prior, scoring);
  };
  auto gradient = [&](const std::vector<double>& x) {
    const double h = 1e-7;
    const std::size_t ref = static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
    std::vector<double> g(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == ref) continue;
      auto plus = x;
      plus[j] += h;
      plus[ref] -= h;
      if (x[j] >= h) {
        auto minus = x;
        minus[j] -= h;
        minus[ref] += h;
        g[j] = (objective(plus) - objective(minus)) / (2.0 * h);
      } else {
        g[j] = (objective(plus) - objective(x)) / h;
      }
    }
    return g;
  };

  std::mt19937_64 rng(budget.seed);
  std::gamma_distribution<double> gamma_draw(1.0, 1.0);
  std::vector<double> best;
  double best_value = -std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < budget.restarts; ++restart) {
    std::vector<double> x(n);
    for (double& v : x) v = gamma_draw(rng) + 1e-3;
    const double total = std::accumulate(x.begin(), x.end(), 0.0);
    for (double& v : x) v /= total;

    double fx = objective(x);
    auto g = gradient(x);
    double step = 1e-2;
    for (int it = 0; it < budget.max_iterations; ++it) {
      std::vector<double> trial(n);
      for (std::size_t j = 0; j < n; ++j) trial[j] = x[j] + step * g[j];
      trial = detail::project_to_simplex(std::move(trial));
      std::vector<double> dir(n);
      double slope = 0.0, dir_norm = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        dir[j] = trial[j] - x[j];
        slope += g[j] * dir[j];
        dir_norm = std::max(dir_norm, std::abs(dir[j]));
      }
      if (dir_norm < 1e-14) break;
      double t = 1.0;
      std::vector<double> next(n);
      double fnext = fx;
      for (int ls = 0; ls < 60; ++ls) {
        for (std::size_t j = 0; j < n; ++j) next[j] = std::max(x[j] + t * dir[j], 0.0);
        fnext = objective(next);
        if (fnext >= fx + 1e-4 * t * slope) break;
        t *= 0.5;
      }
      if (!(fnext >= fx)) break;
      auto gnext = gradient(next);
      double ss = 0.0, sy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double s = next[j] - x[j];
        ss += s * s;
        sy += s * (gnext[j] - g[j]);
      }
      step = sy < 0.0 ? std::clamp(ss / -sy, 1e-12, 1e6) : 1e-2;
      const double improvement = fnext - fx;
      x = std::move(next);
      g = std::move(gnext);
      fx = fnext;
      if (dir_norm < 1e-11 || improvement <= 1e-14 * (1.0 + std::abs(fx))) break;
    }
    if (fx > best_value) {
      best_value = fx;
      best = x;
    }
  }
  return UnitDistribution::from_weights(best);
}

inline UnitDistribution maximize_fms_numeric(const Dataset& dataset, const Vocabulary& vocab,
                                             const ClosedFormConfig& config, const OracleBudget& budget = {},
                                             const TokenizerConfig& tokenizer = {}) {
  if (vocab.size() > 8) throw PreconditionError("numeric oracle supports at most 8 units");
  const auto pairs = reference_pairs(dataset, vocab, tokenizer);
  double gamma = config.gamma;
  if (config.prior == Prior::document && config.gamma_auto)
    gamma = 1.01 * document_prior_gamma_bound(pairs, config.smoothing);
  return maximize_fms_numeric(pairs, vocab.size(), gamma, config.prior, budget, config.smoothing);
}

}  // namespace klearn
