#pragma once

// Probability-simplex primitives: the UnitDistribution value type, entropy,
// smoothed KL, Jensen-Shannon, and the analytic maximizer of the summary score.
// All logarithms are natural (results in nats).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace klearn {

inline constexpr double kSumTolerance = 1e-9;

struct SmoothingConfig {
  // Additive mass given to every unit before renormalizing.
  double epsilon = 1e-6;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw std::invalid_argument("smoothing epsilon must be positive and finite");
  }
};

struct ScoringConfig {
  double alpha = 1.0;  // weight of relevance, KL(S||D)
  double beta = 1.0;   // weight of informativeness, KL(S||K)
  SmoothingConfig smoothing;

  void validate() const {
    if (!std::isfinite(alpha) || alpha < 0.0)
      throw std::invalid_argument("alpha must be finite and nonnegative");
    if (!std::isfinite(beta) || beta < 0.0)
      throw std::invalid_argument("beta must be finite and nonnegative");
    smoothing.validate();
  }
};

/// A probability distribution over the units of a vocabulary.
///
/// Stored densely. `empty_support()` is set when the distribution was built
/// from a text without any in-vocabulary token and fell back to uniform.
class UnitDistribution {
 public:
  UnitDistribution() = default;

  explicit UnitDistribution(std::vector<double> probs, bool empty_support = false)
      : probs_(std::move(probs)), empty_support_(empty_support) {
    if (probs_.empty()) throw std::invalid_argument("distribution must have at least one unit");
    double sum = 0.0;
    for (double p : probs_) {
      if (!std::isfinite(p) || p < 0.0)
        throw std::invalid_argument("distribution entries must be finite and nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance)
      throw std::invalid_argument("distribution must sum to 1 (got " + std::to_string(sum) + ")");
  }

  static UnitDistribution uniform(std::size_t n, bool empty_support = false) {
    if (n == 0) throw std::invalid_argument("distribution must have at least one unit");
    return UnitDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)), empty_support);
  }

  // Normalizes nonnegative weights with a positive total.
  static UnitDistribution from_weights(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0.0)
        throw std::invalid_argument("weights must be finite and nonnegative");
      total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("weights must have a positive total");
    std::vector<double> probs(weights.begin(), weights.end());
    for (double& p : probs) p /= total;
    return UnitDistribution(std::move(probs));
  }

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t j) const { return probs_[j]; }
  std::span<const double> probs() const { return probs_; }
  bool empty_support() const { return empty_support_; }

  bool operator==(const UnitDistribution&) const = default;

 private:
  std::vector<double> probs_;
  bool empty_support_ = false;
};

namespace detail {

inline void require_same_length(std::size_t a, std::size_t b) {
  if (a != b)
    throw std::invalid_argument("distribution length mismatch: " + std::to_string(a) + " vs " +
                                std::to_string(b));
}

inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace detail

// (p_j + eps) / (1 + n eps)
inline std::vector<double> smoothed(std::span<const double> p, const SmoothingConfig& smoothing) {
  const double n = static_cast<double>(p.size());
  const double norm = 1.0 + n * smoothing.epsilon;
  std::vector<double> out(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) out[j] = (p[j] + smoothing.epsilon) / norm;
  return out;
}

inline double entropy(const UnitDistribution& p) {
  double h = 0.0;
  for (double x : p.probs()) h -= detail::xlogx(x);
  return h;
}

// KL between the epsilon-smoothed versions of p and q.
inline double kl(const UnitDistribution& p, const UnitDistribution& q,
                 const SmoothingConfig& smoothing = {}) {
  detail::require_same_length(p.size(), q.size());
  smoothing.validate();
  const auto ps = smoothed(p.probs(), smoothing);
  const auto qs = smoothed(q.probs(), smoothing);
  double d = 0.0;
  for (std::size_t j = 0; j < ps.size(); ++j) d += ps[j] * std::log(ps[j] / qs[j]);
  return std::max(d, 0.0);
}

// Unsmoothed Jensen-Shannon divergence; the midpoint covers both supports.
inline double js(const UnitDistribution& p, const UnitDistribution& q) {
  detail::require_same_length(p.size(), q.size());
  double d = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double m = 0.5 * (p[j] + q[j]);
    if (p[j] > 0.0) d += 0.5 * p[j] * std::log(p[j] / m);
    if (q[j] > 0.0) d += 0.5 * q[j] * std::log(q[j] / m);
  }
  return std::clamp(d, 0.0, std::log(2.0));
}

/// Maximizer of H(S) - KL(S||D) + KL(S||K) over the simplex (alpha = beta = 1).
///
/// With smoothing applied inside the KL terms the score equals
/// H(s) + sum_j s_j ln(d~_j / k~_j) / (1 + n eps) + const, whose maximizer is
/// s_j proportional to (d~_j / k~_j)^(1 / (1 + n eps)). The exponent tends to 1
/// as eps -> 0, recovering s_j proportional to d_j / k_j.
inline UnitDistribution optimal_summary_distribution(const UnitDistribution& d,
                                                     const UnitDistribution& k,
                                                     const ScoringConfig& config) {
  detail::require_same_length(d.size(), k.size());
  config.validate();
  if (config.alpha != 1.0 || config.beta != 1.0)
    throw std::invalid_argument("optimal summary distribution is only defined for alpha = beta = 1");
  const auto ds = smoothed(d.probs(), config.smoothing);
  const auto ks = smoothed(k.probs(), config.smoothing);
  const double exponent =
      1.0 / (1.0 + static_cast<double>(d.size()) * config.smoothing.epsilon);
  std::vector<double> logw(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) logw[j] = exponent * (std::log(ds[j]) - std::log(ks[j]));
  const double top = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) w[j] = std::exp(logw[j] - top);
  return UnitDistribution::from_weights(w);
}

inline double total_variation(const UnitDistribution& p, const UnitDistribution& q) {
  detail::require_same_length(p.size(), q.size());
  double t = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) t += std::abs(p[j] - q[j]);
  return 0.5 * t;
}

}  // namespace klearn
