#pragma once

// Extractive summarization: pick a sentence subset under a word budget that
// maximizes theta_K of the concatenated text.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "klearn/corpus.hpp"
#include "klearn/distribution.hpp"
#include "klearn/error.hpp"
#include "klearn/scoring.hpp"
#include "klearn/sentence.hpp"

namespace klearn {

struct PoolSentence {
  std::string text;
  std::size_t word_count = 0;                             // all tokens, in or out of vocabulary
  std::vector<std::pair<std::size_t, double>> counts;    // in-vocabulary unit counts
};

struct SentencePool {
  std::string topic_id;
  std::size_t n_units = 0;
  std::vector<PoolSentence> sentences;

  std::size_t size() const { return sentences.size(); }

  // Token-count mixture of the selected sentences, i.e. the distribution of
  // their concatenation.
  UnitDistribution distribution(const std::vector<std::size_t>& selected) const {
    std::vector<double> w(n_units, 0.0);
    double total = 0.0;
    for (std::size_t i : selected)
      for (auto [unit, c] : sentences.at(i).counts) {
        w[unit] += c;
        total += c;
      }
    if (total == 0.0) return UnitDistribution::uniform(n_units, true);
    return UnitDistribution::from_weights(w);
  }

  std::size_t words(const std::vector<std::size_t>& selected) const {
    std::size_t total = 0;
    for (std::size_t i : selected) total += sentences.at(i).word_count;
    return total;
  }
};

inline SentencePool sentence_pool(const std::string& topic_id, const std::vector<std::string>& sentences,
                                  const Vocabulary& vocab, const TokenizerConfig& tokenizer = {}) {
  SentencePool pool{topic_id, vocab.size(), {}};
  for (const auto& text : sentences) {
    const auto tokens = tokenize(text, tokenizer);
    if (tokens.empty()) continue;
    std::map<std::size_t, double> counts;
    for (const auto& t : tokens)
      if (auto idx = vocab.index_of(t)) counts[*idx] += 1.0;
    pool.sentences.push_back({text, tokens.size(), {counts.begin(), counts.end()}});
  }
  if (pool.sentences.empty()) throw PreconditionError("no sentences found in topic '" + topic_id + "'");
  return pool;
}

inline SentencePool split_sentences(const Topic& topic, const Vocabulary& vocab,
                                    const TokenizerConfig& tokenizer = {}) {
  std::vector<std::string> sentences;
  for (const auto& doc : topic.documents)
    for (auto& s : split_text_sentences(doc)) sentences.push_back(std::move(s));
  return sentence_pool(topic.id, sentences, vocab, tokenizer);
}

/// theta of a selection; an empty selection scores -infinity.
inline double selection_score(const SentencePool& pool, const std::vector<std::size_t>& selected,
                              const UnitDistribution& d, const UnitDistribution& k,
                              const ScoringConfig& scoring = {}) {
  if (selected.empty()) return -std::numeric_limits<double>::infinity();
  return theta(pool.distribution(selected), d, k, scoring);
}

struct Selection {
  std::vector<std::size_t> indices;  // ascending
  double score = -std::numeric_limits<double>::infinity();
  std::size_t words = 0;
};

inline Selection greedy_summarize(const SentencePool& pool, const UnitDistribution& d, const UnitDistribution& k,
                                  std::size_t budget, const ScoringConfig& scoring = {}) {
  if (pool.size() == 0) throw PreconditionError("sentence pool is empty");
  Selection current;
  std::vector<bool> used(pool.size(), false);
  for (;;) {
    std::optional<std::size_t> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (used[i] || current.words + pool.sentences[i].word_count > budget) continue;
      auto candidate = current.indices;
      candidate.push_back(i);
      const double s = selection_score(pool, candidate, d, k, scoring);
      if (!best || s > best_score) {
        best = i;
        best_score = s;
      }
    }
    if (!best || !(best_score > current.score)) break;
    used[*best] = true;
    current.indices.push_back(*best);
    current.words += pool.sentences[*best].word_count;
    current.score = best_score;
  }
  std::sort(current.indices.begin(), current.indices.end());
  return current;
}

inline Selection greedy_summarize(const SentencePool& pool, const UnitDistribution& d, const KnowledgeModel& model,
                                  std::size_t budget, const ScoringConfig& scoring = {}) {
  return greedy_summarize(pool, d, model.k(), budget, scoring);
}

struct GeneticConfig {
  std::size_t population = 100;
  std::size_t generations = 200;
  double mutation_rate = 0.2;
  double crossover_rate = 0.8;
  std::uint64_t seed = 0;
  std::size_t length_budget = 100;

  void validate() const {
    if (population < 2) throw std::invalid_argument("population must be >= 2");
    if (length_budget == 0) throw std::invalid_argument("length budget must be positive");
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0) || !(crossover_rate >= 0.0 && crossover_rate <= 1.0))
      throw std::invalid_argument("mutation and crossover rates must lie in [0,1]");
  }
};

namespace detail {

class GeneticSearch {
 public:
  GeneticSearch(const SentencePool& pool, const UnitDistribution& d, const UnitDistribution& k,
                const GeneticConfig& config, const ScoringConfig& scoring)
      : pool_(pool), d_(d), k_(k), config_(config), scoring_(scoring), rng_(config.seed) {}

  using Genome = std::vector<bool>;

  static std::vector<std::size_t> members(const Genome& g) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g[i]) out.push_back(i);
    return out;
  }

  double fitness(const Genome& g) {
    auto it = cache_.find(g);
    if (it != cache_.end()) return it->second;
    const double f = selection_score(pool_, members(g), d_, k_, scoring_);
    cache_.emplace(g, f);
    if (f > best_.score) best_ = {members(g), f, pool_.words(members(g))};
    return f;
  }

  // Drops the sentence whose removal leaves the highest score until the
  // genome fits the budget.
  void repair(Genome& g) {
    auto sel = members(g);
    while (pool_.words(sel) > config_.length_budget) {
      std::size_t drop = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < sel.size(); ++r) {
        auto rest = sel;
        rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(r));
        const double s = selection_score(pool_, rest, d_, k_, scoring_);
        if (r == 0 || s > best) {
          best = s;
          drop = r;
        }
      }
      g[sel[drop]] = false;
      sel.erase(sel.begin() + static_cast<std::ptrdiff_t>(drop));
    }
  }

  Genome random_genome() {
    Genome g(pool_.size(), false);
    std::vector<std::size_t> order(pool_.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    std::bernoulli_distribution take(0.5);
    std::size_t words = 0;
    for (std::size_t i : order) {
      const std::size_t w = pool_.sentences[i].word_count;
      if (words + w <= config_.length_budget && take(rng_)) {
        g[i] = true;
        words += w;
      }
    }
    return g;
  }

  void mutate(Genome& g) {
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < g.size(); ++i) (g[i] ? in : out).push_back(i);
    if (out.empty()) return;
    std::uniform_int_distribution<std::size_t> pick_out(0, out.size() - 1);
    if (in.empty()) {
      g[out[pick_out(rng_)]] = true;
      return;
    }
    std::uniform_int_distribution<std::size_t> pick_in(0, in.size() - 1);
    g[in[pick_in(rng_)]] = false;
    g[out[pick_out(rng_)]] = true;
  }

  Selection run(const Selection& seed_solution) {
    const std::size_t n = pool_.size();
    std::vector<Genome> population;
    Genome injected(n, false);
    for (std::size_t i : seed_solution.indices) injected[i] = true;
    population.push_back(injected);
    while (population.size() < config_.population) population.push_back(random_genome());
    std::vector<double> fit;
    for (auto& g : population) fit.push_back(fitness(g));

    std::uniform_int_distribution<std::size_t> pick(0, config_.population - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto tournament = [&]() -> const Genome& {
      const std::size_t a = pick(rng_), b = pick(rng_);
      return fit[a] >= fit[b] ? population[a] : population[b];
    };

    for (std::size_t gen = 0; gen < config_.generations; ++gen) {
      std::vector<Genome> next;
      const auto elite = static_cast<std::size_t>(std::max_element(fit.begin(), fit.end()) - fit.begin());
      next.push_back(population[elite]);
      while (next.size() < config_.population) {
        Genome a = tournament();
        Genome b = tournament();
        if (n > 1 && unit(rng_) < config_.crossover_rate) {
          std::uniform_int_distribution<std::size_t> cut_dist(1, n - 1);
          const std::size_t cut = cut_dist(rng_);
          for (std::size_t i = cut; i < n; ++i) {
            const bool tmp = a[i];
            a[i] = b[i];
            b[i] = tmp;
          }
        }
        for (Genome* child : {&a, &b}) {
          if (unit(rng_) < config_.mutation_rate) mutate(*child);
          repair(*child);
          if (next.size() < config_.population) next.push_back(std::move(*child));
        }
      }
      population = std::move(next);
      fit.clear();
      for (auto& g : population) fit.push_back(fitness(g));
    }
    return best_;
  }

 private:
  const SentencePool& pool_;
  const UnitDistribution& d_;
  const UnitDistribution& k_;
  GeneticConfig config_;
  ScoringConfig scoring_;
  std::mt19937_64 rng_;
  std::map<Genome, double> cache_;
  Selection best_;
};

}  // namespace detail

/// Evolutionary search seeded with the greedy solution; returns the best
/// selection ever evaluated, so its score is never below greedy's.
inline Selection genetic_summarize(const SentencePool& pool, const UnitDistribution& d, const UnitDistribution& k,
                                   const GeneticConfig& config, const ScoringConfig& scoring = {}) {
  config.validate();
  if (pool.size() == 0) throw PreconditionError("sentence pool is empty");
  const Selection greedy = greedy_summarize(pool, d, k, config.length_budget, scoring);
  detail::GeneticSearch search(pool, d, k, config, scoring);
  Selection best = search.run(greedy);
  if (greedy.score >= best.score) return greedy;
  return best;
}

inline Selection genetic_summarize(const SentencePool& pool, const UnitDistribution& d, const KnowledgeModel& model,
                                   const GeneticConfig& config, const ScoringConfig& scoring = {}) {
  return genetic_summarize(pool, d, model.k(), config, scoring);
}

}  // namespace klearn
