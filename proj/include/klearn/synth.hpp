#pragma once

// Planted-truth corpus generator. A ground-truth K* is drawn, documents are
// drawn independently of it, and each reference summary realizes the exact
// maximizer of theta_{K*} for its document. System summaries mix that ideal
// with a random resample of the document at stratified weights, and judged
// scores are theta_{K*} plus noise and a per-annotator offset.
//
// Texts are realized deterministically: a target distribution p becomes
// round(L p) tokens (largest-remainder rounding) in shuffled order, so a text's
// unit distribution is the closest L-token approximation of its target. A
// noise-free reference is then hill-climbed to the best L-token text under K*.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <random>
#include <string>
#include <vector>

#include "klearn/corpus.hpp"
#include "klearn/distribution.hpp"
#include "klearn/scoring.hpp"

namespace klearn {

struct SynthConfig {
  std::size_t vocab_size = 30;
  std::size_t n_topics = 200;
  std::uint64_t seed = 42;
  double doc_concentration = 1.0;        // symmetric Dirichlet for documents
  double knowledge_concentration = 1.0;  // symmetric Dirichlet for K*
  double summary_noise = 0.0;            // logit noise on the ideal summary
  std::size_t n_system_summaries_per_topic = 10;
  double system_mix_max = 0.9;              // largest weight of the ideal in a system summary
  std::size_t system_sample_length = 1000;  // tokens in the document resample mixed into a system summary
  double judgment_noise_sd = 0.0;
  std::size_t annotator_count = 1;
  double annotator_bias_sd = 0.0;
  std::size_t document_length = 1000;    // tokens
  std::size_t summary_length = 100;      // tokens
  std::size_t min_sentence_length = 8;
  std::size_t max_sentence_length = 20;
  // Test hook: every document realizes K* exactly.
  bool documents_equal_knowledge = false;

  void validate() const {
    if (vocab_size < 1 || n_topics < 1 || n_system_summaries_per_topic < 1 || annotator_count < 1 ||
        document_length < 1 || summary_length < 1 || system_sample_length < 1 || min_sentence_length < 1 ||
        max_sentence_length < min_sentence_length)
      throw std::invalid_argument("synth: all sizes must be >= 1");
    if (!(doc_concentration > 0.0) || !(knowledge_concentration > 0.0))
      throw std::invalid_argument("synth: Dirichlet concentrations must be positive");
    if (!(summary_noise >= 0.0) || !(judgment_noise_sd >= 0.0) || !(annotator_bias_sd >= 0.0))
      throw std::invalid_argument("synth: noise parameters must be nonnegative");
    if (!(system_mix_max >= 0.0 && system_mix_max <= 1.0))
      throw std::invalid_argument("synth: system_mix_max must lie in [0,1]");
  }
};

struct SynthResult {
  Dataset dataset;
  KnowledgeModel k_star;
  Vocabulary vocab;
  std::vector<UnitDistribution> ideal_summaries;  // s*_i per topic
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ splitmix64(stream)) + index);
}

inline std::vector<double> dirichlet(std::size_t n, double concentration, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(concentration, 1.0);
  std::vector<double> w(n);
  double total = 0.0;
  do {
    total = 0.0;
    for (double& x : w) total += x = g(rng);
  } while (!(total > 0.0));
  for (double& x : w) x /= total;
  return w;
}

// Largest-remainder rounding of length * p to integer counts summing to length.
inline std::vector<std::size_t> quantize(std::span<const double> p, std::size_t length) {
  std::vector<std::size_t> counts(p.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double exact = p[j] * static_cast<double>(length);
    counts[j] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[j];
    remainders.emplace_back(exact - std::floor(exact), j);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < length; ++r, ++assigned) ++counts[remainders[r % remainders.size()].second];
  return counts;
}

inline std::vector<double> counts_to_probs(const std::vector<std::size_t>& counts) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  std::vector<double> p(counts.size());
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = static_cast<double>(counts[j]) / total;
  return p;
}

// Unit distribution of `length` tokens drawn with replacement from d.
inline std::vector<double> document_sample(const UnitDistribution& d, std::size_t length, std::mt19937_64& rng) {
  std::discrete_distribution<std::size_t> draw(d.probs().begin(), d.probs().end());
  std::vector<std::size_t> counts(d.size(), 0);
  for (std::size_t t = 0; t < length; ++t) ++counts[draw(rng)];
  return counts_to_probs(counts);
}

// Moves single tokens between units while that raises theta_{k}, starting from
// `counts`. Used to realize the ideal summary as the best fixed-length text.
inline std::vector<std::size_t> improve_counts(std::vector<std::size_t> counts, const UnitDistribution& d,
                                               const UnitDistribution& k, const ScoringConfig& scoring) {
  auto score = [&](const std::vector<std::size_t>& c) { return theta(UnitDistribution(counts_to_probs(c)), d, k, scoring); };
  double current = score(counts);
  for (bool improved = true; improved;) {
    improved = false;
    for (std::size_t from = 0; from < counts.size(); ++from) {
      if (counts[from] == 0) continue;
      for (std::size_t to = 0; to < counts.size() && counts[from] > 0; ++to) {
        if (to == from) continue;
        --counts[from];
        ++counts[to];
        const double s = score(counts);
        if (s > current) {
          current = s;
          improved = true;
        } else {
          ++counts[from];
          --counts[to];
        }
      }
    }
  }
  return counts;
}

// Shuffled tokens cut into capitalized, period-terminated sentences.
inline std::string realize_text(const std::vector<std::size_t>& counts, const Vocabulary& vocab,
                                const SynthConfig& config, std::mt19937_64& rng) {
  std::vector<std::size_t> tokens;
  for (std::size_t j = 0; j < counts.size(); ++j) tokens.insert(tokens.end(), counts[j], j);
  std::shuffle(tokens.begin(), tokens.end(), rng);
  std::uniform_int_distribution<std::size_t> sentence_len(config.min_sentence_length, config.max_sentence_length);
  std::string out;
  std::size_t pos = 0;
  while (pos < tokens.size()) {
    const std::size_t len = std::min(sentence_len(rng), tokens.size() - pos);
    if (!out.empty()) out.push_back(' ');
    for (std::size_t t = 0; t < len; ++t) {
      std::string word = vocab.unit(tokens[pos + t]);
      if (t == 0) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
      if (t > 0) out.push_back(' ');
      out += word;
    }
    out.push_back('.');
    pos += len;
  }
  return out;
}

}  // namespace detail

inline SynthResult generate(const SynthConfig& config) {
  config.validate();
  const std::size_t n = config.vocab_size;
  std::vector<std::string> units;
  for (std::size_t j = 0; j < n; ++j) units.push_back("w" + std::to_string(j));
  const Vocabulary vocab(units);
  const ScoringConfig scoring;

  std::mt19937_64 k_rng(detail::derive_seed(config.seed, 0, 0));
  auto k_probs = detail::dirichlet(n, config.knowledge_concentration, k_rng);
  if (config.documents_equal_knowledge)
    k_probs = detail::counts_to_probs(detail::quantize(k_probs, config.document_length));
  const UnitDistribution k_star(k_probs);

  std::mt19937_64 bias_rng(detail::derive_seed(config.seed, 3, 0));
  std::normal_distribution<double> bias_draw(0.0, 1.0);
  std::vector<double> annotator_bias(config.annotator_count);
  for (double& b : annotator_bias) b = config.annotator_bias_sd * bias_draw(bias_rng);

  SynthResult result{Dataset{"synth", {}}, KnowledgeModel(k_star, vocab), vocab, {}};
  for (std::size_t i = 0; i < config.n_topics; ++i) {
    std::mt19937_64 rng(detail::derive_seed(config.seed, 1, i));
    std::mt19937_64 noise_rng(detail::derive_seed(config.seed, 2, i));
    std::normal_distribution<double> standard(0.0, 1.0);

    const auto doc_target = config.documents_equal_knowledge ? k_probs : detail::dirichlet(n, config.doc_concentration, rng);
    const auto doc_counts = detail::quantize(doc_target, config.document_length);
    const UnitDistribution d(detail::counts_to_probs(doc_counts));
    const auto ideal = optimal_summary_distribution(d, k_star, scoring);

    Topic topic;
    topic.id = "t" + std::to_string(i);
    topic.documents.push_back(detail::realize_text(doc_counts, vocab, config, rng));
    const std::string annotator = "a" + std::to_string(i % config.annotator_count);
    topic.tags["annotator"] = annotator;
    const double offset = annotator_bias[i % config.annotator_count];

    std::vector<double> ref_target(ideal.probs().begin(), ideal.probs().end());
    if (config.summary_noise > 0.0) {
      for (double& x : ref_target) x = std::log(x) + config.summary_noise * standard(noise_rng);
      const double top = *std::max_element(ref_target.begin(), ref_target.end());
      for (double& x : ref_target) x = std::exp(x - top);
      const double total = std::accumulate(ref_target.begin(), ref_target.end(), 0.0);
      for (double& x : ref_target) x /= total;
    }

    auto add_summary = [&](const std::vector<double>& target, bool reference) {
      auto counts = detail::quantize(target, config.summary_length);
      if (reference && config.summary_noise == 0.0) counts = detail::improve_counts(std::move(counts), d, k_star, scoring);
      std::string text = detail::realize_text(counts, vocab, config, rng);
      const UnitDistribution s(detail::counts_to_probs(counts));
      double h = theta(s, d, k_star, scoring) + offset;
      if (config.judgment_noise_sd > 0.0) h += config.judgment_noise_sd * standard(noise_rng);
      if (reference) topic.reference_summaries.push_back(text);
      topic.judged_summaries.push_back({std::move(text), h, annotator});
    };

    add_summary(ref_target, true);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t m = 0; m < config.n_system_summaries_per_topic; ++m) {
      // One weight per stratum of [0, system_mix_max], so quality is graded.
      const double lambda = (static_cast<double>(m) + unit(rng)) /
                            static_cast<double>(config.n_system_summaries_per_topic) * config.system_mix_max;
      const auto noise = detail::document_sample(d, config.system_sample_length, rng);
      std::vector<double> target(n);
      for (std::size_t j = 0; j < n; ++j) target[j] = lambda * ideal[j] + (1.0 - lambda) * noise[j];
      add_summary(target, false);
    }
    result.dataset.topics.push_back(std::move(topic));
    result.ideal_summaries.push_back(ideal);
  }

  Provenance prov;
  prov.algorithm = "synth-k-star";
  prov.seed = config.seed;
  prov.hyperparams = {{"vocab_size", config.vocab_size},
                      {"n_topics", config.n_topics},
                      {"knowledge_concentration", config.knowledge_concentration},
                      {"doc_concentration", config.doc_concentration}};
  result.k_star = KnowledgeModel(k_star, vocab, prov);
  return result;
}

/// Gaussian logit noise on K*, renormalized by softmax. noise = 0 returns K*.
inline KnowledgeModel perturbed_knowledge(const KnowledgeModel& k_star, double noise, std::uint64_t seed) {
  if (!(noise >= 0.0)) throw std::invalid_argument("perturbation noise must be nonnegative");
  Provenance prov = k_star.provenance();
  prov.algorithm = "perturbed";
  prov.seed = seed;
  prov.hyperparams = {{"noise", noise}};
  if (noise == 0.0) return KnowledgeModel(k_star.k(), k_star.vocab(), prov);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, noise);
  std::vector<double> logits;
  for (double p : k_star.k().probs()) logits.push_back(std::log(std::max(p, 1e-300)) + z(rng));
  const double top = *std::max_element(logits.begin(), logits.end());
  for (double& x : logits) x = std::exp(x - top);
  return KnowledgeModel(UnitDistribution::from_weights(logits), k_star.vocab(), prov);
}

}  // namespace klearn
