#pragma once

// Gradient-based inference of K over the softmax parametrization K = softmax(k):
//
//   PM    contrastive likelihood of each reference summary against sampled
//         negative summaries of its own document ((1+m)-way softmax)
//   hReg  1/2 (a * theta_K(x) - h)^2, with a optionally learned as exp(log_a)
//   hPL   binary cross-entropy of sigma(theta_K(better) - theta_K(worse))
//
// theta depends on K only through -beta * sum_j s~_j ln k~_j, so every summary
// is reduced once to ThetaFeatures and the trainers work on those.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "klearn/corpus.hpp"
#include "klearn/distribution.hpp"
#include "klearn/error.hpp"
#include "klearn/pairs.hpp"
#include "klearn/scoring.hpp"
#include "klearn/sentence.hpp"

namespace klearn {

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  std::size_t negatives_per_positive = 4;  // PM only
  std::size_t negative_budget = 100;       // PM only, words per negative summary
  std::optional<double> reg_scale_a;       // hReg only; nullopt means learned

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw std::invalid_argument("learning rate must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (negatives_per_positive < 1) throw std::invalid_argument("negatives per positive must be >= 1");
    if (negative_budget < 1) throw std::invalid_argument("negative budget must be >= 1");
    if (reg_scale_a && !(*reg_scale_a > 0.0)) throw std::invalid_argument("regression scale a must be > 0");
  }
};

/// Unconstrained logits whose softmax is K.
class SoftmaxParams {
 public:
  explicit SoftmaxParams(std::size_t n) : logits_(n, 0.0) {}
  explicit SoftmaxParams(std::vector<double> logits) : logits_(std::move(logits)) {}

  std::span<double> logits() { return logits_; }
  std::span<const double> logits() const { return logits_; }

  std::vector<double> probabilities() const {
    const double top = *std::max_element(logits_.begin(), logits_.end());
    std::vector<double> p(logits_.size());
    double total = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) total += p[j] = std::exp(logits_[j] - top);
    for (double& x : p) x /= total;
    return p;
  }

  UnitDistribution to_distribution() const { return UnitDistribution::from_weights(probabilities()); }

  // Logits shifted to mean zero; the distribution is unchanged.
  std::vector<double> canonical_logits() const {
    const double mean = std::accumulate(logits_.begin(), logits_.end(), 0.0) /
                        static_cast<double>(logits_.size());
    std::vector<double> out(logits_);
    for (double& x : out) x -= mean;
    return out;
  }

 private:
  std::vector<double> logits_;
};

// theta(s) = base - beta * sum_j smoothed_summary_j * ln k~_j
struct ThetaFeatures {
  std::vector<double> smoothed_summary;
  double base = 0.0;
};

inline ThetaFeatures theta_features(const UnitDistribution& s, const UnitDistribution& d,
                                    const ScoringConfig& scoring) {
  ThetaFeatures f;
  f.smoothed_summary = smoothed(s.probs(), scoring.smoothing);
  double self = 0.0;
  for (double x : f.smoothed_summary) self += x * std::log(x);
  f.base = entropy(s) - scoring.alpha * kl(s, d, scoring.smoothing) + scoring.beta * self;
  return f;
}

namespace detail {

// Everything about the current K that theta and its gradient need.
struct KnowledgeState {
  std::vector<double> k;
  std::vector<double> log_k_smoothed;

  KnowledgeState(std::span<const double> logits, const SmoothingConfig& smoothing)
      : k(SoftmaxParams(std::vector<double>(logits.begin(), logits.end())).probabilities()),
        log_k_smoothed(k.size()) {
    const double norm = std::log(1.0 + static_cast<double>(k.size()) * smoothing.epsilon);
    for (std::size_t j = 0; j < k.size(); ++j)
      log_k_smoothed[j] = std::log(k[j] + smoothing.epsilon) - norm;
  }

  double theta(const ThetaFeatures& f, double beta) const {
    double cross = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j) cross += f.smoothed_summary[j] * log_k_smoothed[j];
    return f.base - beta * cross;
  }

  // grad += scale * d theta / d logits.
  // With g_i = -beta s~_i / (K_i + eps): d theta / d k_m = K_m (g_m - sum_i g_i K_i).
  void add_theta_gradient(const ThetaFeatures& f, double beta, double eps, double scale,
                          std::vector<double>& grad) const {
    if (scale == 0.0) return;
    std::vector<double> g(k.size());
    double weighted = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
      g[i] = -beta * f.smoothed_summary[i] / (k[i] + eps);
      weighted += g[i] * k[i];
    }
    for (std::size_t m = 0; m < k.size(); ++m) grad[m] += scale * k[m] * (g[m] - weighted);
  }
};

inline double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Losses (mean over the given examples) with analytic gradients

struct PmExample {
  ThetaFeatures positive;
  std::vector<ThetaFeatures> negatives;
};

inline double pm_loss(std::span<const double> logits, std::span<const PmExample> batch,
                      const ScoringConfig& scoring, std::vector<double>* grad = nullptr) {
  const detail::KnowledgeState state(logits, scoring.smoothing);
  if (grad) grad->assign(logits.size(), 0.0);
  if (batch.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& ex : batch) {
    std::vector<double> scores{state.theta(ex.positive, scoring.beta)};
    for (const auto& neg : ex.negatives) scores.push_back(state.theta(neg, scoring.beta));
    const double top = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - top);
    const double log_z = top + std::log(z);
    loss += log_z - scores[0];
    if (grad) {
      // d/dtheta_g = softmax_g - [g is the positive]
      const double p0 = std::exp(scores[0] - log_z);
      state.add_theta_gradient(ex.positive, scoring.beta, scoring.smoothing.epsilon, inv * (p0 - 1.0), *grad);
      for (std::size_t g = 0; g < ex.negatives.size(); ++g)
        state.add_theta_gradient(ex.negatives[g], scoring.beta, scoring.smoothing.epsilon,
                                 inv * std::exp(scores[g + 1] - log_z), *grad);
    }
  }
  return loss * inv;
}

struct RegressionExample {
  ThetaFeatures summary;
  double target = 0.0;  // human score h
};

inline double hreg_loss(std::span<const double> logits, double log_a, std::span<const RegressionExample> batch,
                        const ScoringConfig& scoring, std::vector<double>* grad = nullptr,
                        double* grad_log_a = nullptr) {
  const detail::KnowledgeState state(logits, scoring.smoothing);
  if (grad) grad->assign(logits.size(), 0.0);
  if (grad_log_a) *grad_log_a = 0.0;
  if (batch.empty()) return 0.0;
  const double a = std::exp(log_a);
  const double inv = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& ex : batch) {
    const double th = state.theta(ex.summary, scoring.beta);
    const double residual = a * th - ex.target;
    loss += 0.5 * residual * residual;
    if (grad) state.add_theta_gradient(ex.summary, scoring.beta, scoring.smoothing.epsilon, inv * residual * a, *grad);
    if (grad_log_a) *grad_log_a += inv * residual * a * th;
  }
  return loss * inv;
}

struct PairExample {
  ThetaFeatures better;
  ThetaFeatures worse;
};

inline double hpl_loss(std::span<const double> logits, std::span<const PairExample> batch,
                       const ScoringConfig& scoring, std::vector<double>* grad = nullptr) {
  const detail::KnowledgeState state(logits, scoring.smoothing);
  if (grad) grad->assign(logits.size(), 0.0);
  if (batch.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& ex : batch) {
    const double margin = state.theta(ex.better, scoring.beta) - state.theta(ex.worse, scoring.beta);
    loss -= detail::log_sigmoid(margin);
    if (grad) {
      const double coef = -(1.0 - detail::sigmoid(margin)) * inv;
      state.add_theta_gradient(ex.better, scoring.beta, scoring.smoothing.epsilon, coef, *grad);
      state.add_theta_gradient(ex.worse, scoring.beta, scoring.smoothing.epsilon, -coef, *grad);
    }
  }
  return loss * inv;
}

// ---------------------------------------------------------------------------
// Negative sampling

// Draws sentences uniformly without replacement until `budget` words are
// reached or exceeded (or the pool runs out). Returns the drawn positions.
inline std::vector<std::size_t> sample_sentence_indices(std::span<const std::size_t> word_counts,
                                                        std::mt19937_64& rng, std::size_t budget) {
  if (budget == 0) throw std::invalid_argument("negative summary budget must be positive");
  if (word_counts.empty()) throw PreconditionError("cannot sample a summary from an empty document");
  std::vector<std::size_t> remaining(word_counts.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  std::size_t words = 0;
  while (words < budget && !remaining.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
    const std::size_t slot = pick(rng);
    picked.push_back(remaining[slot]);
    words += word_counts[remaining[slot]];
    remaining[slot] = remaining.back();
    remaining.pop_back();
  }
  return picked;
}

inline std::vector<std::string> topic_sentences(const Topic& topic) {
  std::vector<std::string> out;
  for (const auto& doc : topic.documents)
    for (auto& s : split_text_sentences(doc)) out.push_back(std::move(s));
  return out;
}

inline std::string sample_negative_summary(const Topic& topic, std::mt19937_64& rng, std::size_t budget,
                                           const TokenizerConfig& tokenizer = {}) {
  if (budget == 0) throw std::invalid_argument("negative summary budget must be positive");
  const auto sentences = topic_sentences(topic);
  if (sentences.empty()) throw PreconditionError("topic '" + topic.id + "' has an empty document");
  std::vector<std::size_t> words;
  for (const auto& s : sentences) words.push_back(tokenize(s, tokenizer).size());
  std::string out;
  for (std::size_t i : sample_sentence_indices(words, rng, budget)) {
    if (!out.empty()) out.push_back(' ');
    out += sentences[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Preference pairs

struct PreferencePair {
  std::size_t topic = 0;  // position in the dataset
  std::string topic_id;
  std::size_t better = 0;  // index into the topic's judged summaries
  std::size_t worse = 0;
};

/// All within-topic pairs of judged summaries with strictly different scores,
/// in topic order then (i, j) order with i < j. Ties are skipped.
inline std::vector<PreferencePair> build_preference_pairs(const Dataset& dataset) {
  std::vector<PreferencePair> pairs;
  for (std::size_t t = 0; t < dataset.topics.size(); ++t) {
    const auto& judged = dataset.topics[t].judged_summaries;
    for (std::size_t i = 0; i < judged.size(); ++i)
      for (std::size_t j = i + 1; j < judged.size(); ++j) {
        if (judged[i].score > judged[j].score)
          pairs.push_back({t, dataset.topics[t].id, i, j});
        else if (judged[j].score > judged[i].score)
          pairs.push_back({t, dataset.topics[t].id, j, i});
      }
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Trainers

namespace detail {

// Plain mini-batch SGD over a fixed example set; returns per-epoch mean loss.
// Examples are reshuffled in place every epoch and batches are contiguous.
template <typename Example, typename LossFn>
std::vector<double> run_sgd(std::vector<Example>& examples, std::span<double> params,
                            const TrainConfig& config, std::mt19937_64& rng, LossFn&& loss_and_grad) {
  std::vector<double> trace;
  std::vector<double> grad;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(examples.begin(), examples.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < examples.size(); start += config.batch_size) {
      const std::size_t count = std::min(examples.size() - start, config.batch_size);
      std::span<const Example> batch(examples.data() + start, count);
      epoch_loss += loss_and_grad(batch, grad) * static_cast<double>(count);
      for (std::size_t p = 0; p < params.size(); ++p) params[p] -= config.learning_rate * grad[p];
    }
    trace.push_back(epoch_loss / static_cast<double>(examples.size()));
  }
  return trace;
}

inline KnowledgeModel finish_model(const SoftmaxParams& params, const Vocabulary& vocab, std::string algorithm,
                                   const TrainConfig& config, const ScoringConfig& scoring,
                                   std::vector<double> trace, std::size_t examples) {
  Provenance prov;
  prov.algorithm = std::move(algorithm);
  prov.seed = config.seed;
  prov.hyperparams = {{"learning_rate", config.learning_rate},
                      {"batch_size", config.batch_size},
                      {"epochs", config.epochs},
                      {"alpha", scoring.alpha},
                      {"beta", scoring.beta},
                      {"epsilon", scoring.smoothing.epsilon}};
  prov.data_slice = std::to_string(examples) + " training examples";
  prov.extra["loss_trace"] = std::move(trace);
  prov.extra["logits"] = params.canonical_logits();
  return KnowledgeModel(params.to_distribution(), vocab, std::move(prov));
}

}  // namespace detail

/// Encoded sentences of each topic, used to draw negative summaries quickly.
struct SentenceBank {
  std::vector<std::vector<std::size_t>> units;  // in-vocabulary indices per sentence
  std::vector<std::size_t> words;               // token count per sentence
};

inline SentenceBank sentence_bank(const Topic& topic, const Vocabulary& vocab, const TokenizerConfig& tokenizer) {
  SentenceBank bank;
  for (const auto& s : topic_sentences(topic)) {
    bank.words.push_back(tokenize(s, tokenizer).size());
    bank.units.push_back(encode(s, vocab, tokenizer));
  }
  return bank;
}

inline KnowledgeModel infer_pm(const Dataset& dataset, const Vocabulary& vocab, const TrainConfig& config,
                               const ScoringConfig& scoring = {}, const TokenizerConfig& tokenizer = {}) {
  config.validate();
  scoring.validate();
  const auto pairs = reference_pairs(dataset, vocab, tokenizer);
  std::vector<SentenceBank> banks;
  for (const auto& topic : dataset.topics) {
    banks.push_back(sentence_bank(topic, vocab, tokenizer));
    if (banks.back().words.size() < 2)
      throw PreconditionError("topic '" + topic.id + "' has fewer than 2 sentences to sample negatives from");
  }

  std::vector<ThetaFeatures> positives;
  for (const auto& p : pairs) positives.push_back(theta_features(p.summary, p.document, scoring));

  std::mt19937_64 rng(config.seed);
  SoftmaxParams params(vocab.size());
  std::vector<double> trace;
  std::vector<PmExample> examples(pairs.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    // Fresh negatives every epoch.
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& bank = banks[pairs[i].topic];
      examples[i].positive = positives[i];
      examples[i].negatives.clear();
      for (std::size_t m = 0; m < config.negatives_per_positive; ++m) {
        std::vector<std::size_t> units;
        for (std::size_t s : sample_sentence_indices(bank.words, rng, config.negative_budget))
          units.insert(units.end(), bank.units[s].begin(), bank.units[s].end());
        examples[i].negatives.push_back(
            theta_features(distribution_from_indices(units, vocab.size()), pairs[i].document, scoring));
      }
    }
    TrainConfig one_epoch = config;
    one_epoch.epochs = 1;
    auto t = detail::run_sgd(examples, params.logits(), one_epoch, rng,
                             [&](std::span<const PmExample> batch, std::vector<double>& grad) {
                               return pm_loss(params.logits(), batch, scoring, &grad);
                             });
    trace.push_back(t.front());
  }
  auto model = detail::finish_model(params, vocab, "pm", config, scoring, std::move(trace), pairs.size());
  Provenance prov = model.provenance();
  prov.hyperparams["negatives_per_positive"] = config.negatives_per_positive;
  prov.hyperparams["negative_budget"] = config.negative_budget;
  return KnowledgeModel(model.k(), vocab, std::move(prov));
}

inline std::vector<RegressionExample> regression_examples(const Dataset& dataset, const Vocabulary& vocab,
                                                          const ScoringConfig& scoring,
                                                          const TokenizerConfig& tokenizer = {}) {
  std::vector<RegressionExample> out;
  for (const auto& topic : dataset.topics) {
    if (topic.judged_summaries.empty()) continue;
    const auto d = text_to_distribution(topic.document_text(), vocab, tokenizer);
    for (const auto& j : topic.judged_summaries)
      out.push_back({theta_features(text_to_distribution(j.text, vocab, tokenizer), d, scoring), j.score});
  }
  return out;
}

inline KnowledgeModel infer_hreg(const Dataset& dataset, const Vocabulary& vocab, const TrainConfig& config,
                                 const ScoringConfig& scoring = {}, const TokenizerConfig& tokenizer = {}) {
  config.validate();
  scoring.validate();
  auto examples = regression_examples(dataset, vocab, scoring, tokenizer);
  if (examples.empty()) throw PreconditionError("hreg requires judged summaries");

  const std::size_t n = vocab.size();
  const bool learn_a = !config.reg_scale_a.has_value();
  // Logits followed by log a.
  std::vector<double> params(n + 1, 0.0);
  params[n] = learn_a ? 0.0 : std::log(*config.reg_scale_a);
  std::mt19937_64 rng(config.seed);
  auto trace = detail::run_sgd(examples, std::span<double>(params), config, rng,
                               [&](std::span<const RegressionExample> batch, std::vector<double>& grad) {
                                 double g_a = 0.0;
                                 std::vector<double> g;
                                 const double l = hreg_loss(std::span<const double>(params.data(), n), params[n],
                                                            batch, scoring, &g, &g_a);
                                 g.push_back(learn_a ? g_a : 0.0);
                                 grad = std::move(g);
                                 return l;
                               });
  SoftmaxParams logits(std::vector<double>(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(n)));
  auto model = detail::finish_model(logits, vocab, "hreg", config, scoring, std::move(trace), examples.size());
  Provenance prov = model.provenance();
  prov.hyperparams["reg_scale_a"] = learn_a ? nlohmann::json("learned") : nlohmann::json(*config.reg_scale_a);
  prov.extra["scale_a"] = std::exp(params[n]);
  return KnowledgeModel(model.k(), vocab, std::move(prov));
}

inline std::vector<PairExample> preference_examples(const Dataset& dataset, const Vocabulary& vocab,
                                                    const ScoringConfig& scoring,
                                                    const TokenizerConfig& tokenizer = {}) {
  const auto pairs = build_preference_pairs(dataset);
  std::vector<std::vector<ThetaFeatures>> features(dataset.topics.size());
  for (std::size_t t = 0; t < dataset.topics.size(); ++t) {
    const auto& topic = dataset.topics[t];
    if (topic.judged_summaries.size() < 2) continue;
    const auto d = text_to_distribution(topic.document_text(), vocab, tokenizer);
    for (const auto& j : topic.judged_summaries)
      features[t].push_back(theta_features(text_to_distribution(j.text, vocab, tokenizer), d, scoring));
  }
  std::vector<PairExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({features[p.topic][p.better], features[p.topic][p.worse]});
  return out;
}

inline KnowledgeModel infer_hpl(const Dataset& dataset, const Vocabulary& vocab, const TrainConfig& config,
                                const ScoringConfig& scoring = {}, const TokenizerConfig& tokenizer = {}) {
  config.validate();
  scoring.validate();
  auto examples = preference_examples(dataset, vocab, scoring, tokenizer);
  if (examples.empty()) throw PreconditionError("hpl requires at least one preference pair");
  SoftmaxParams params(vocab.size());
  std::mt19937_64 rng(config.seed);
  auto trace = detail::run_sgd(examples, params.logits(), config, rng,
                               [&](std::span<const PairExample> batch, std::vector<double>& grad) {
                                 return hpl_loss(params.logits(), batch, scoring, &grad);
                               });
  return detail::finish_model(params, vocab, "hpl", config, scoring, std::move(trace), examples.size());
}

}  // namespace klearn
