#pragma once

// Agreement metrics between induced scores and human judgments, a native
// ROUGE-2 recall, and the k-fold cross-validation harness.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "klearn/corpus.hpp"
#include "klearn/error.hpp"
#include "klearn/infer_closed.hpp"
#include "klearn/infer_grad.hpp"
#include "klearn/scoring.hpp"

namespace klearn {

/// Tie-corrected Kendall tau-b.
inline double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("kendall_tau: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("kendall_tau: need at least 2 observations");
  long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0) ++ties_a;
      if (db == 0.0) ++ties_b;
      if (da == 0.0 || db == 0.0) continue;
      ((da > 0.0) == (db > 0.0) ? concordant : discordant) += 1;
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double denom = std::sqrt((pairs - static_cast<double>(ties_a)) * (pairs - static_cast<double>(ties_b)));
  if (denom == 0.0) throw std::invalid_argument("kendall_tau: zero variance input");
  return std::clamp(static_cast<double>(concordant - discordant) / denom, -1.0, 1.0);
}

// Rank 1 = highest score; tied scores share their average rank.
inline std::vector<double> descending_average_ranks(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });
  std::vector<double> ranks(scores.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Judged summaries whose text is not one of the topic's references.
inline std::vector<std::string> system_summaries(const Topic& topic) {
  const std::set<std::string> refs(topic.reference_summaries.begin(), topic.reference_summaries.end());
  std::vector<std::string> out;
  for (const auto& j : topic.judged_summaries)
    if (!refs.contains(j.text)) out.push_back(j.text);
  return out;
}

/// Mean rank of the reference summaries among references and system summaries.
inline double mean_reference_rank(const Topic& topic, const Scorer& scorer, const Vocabulary& vocab,
                                  const TokenizerConfig& tokenizer = {}) {
  const auto systems = system_summaries(topic);
  if (topic.reference_summaries.empty()) throw PreconditionError("topic '" + topic.id + "' has no references");
  if (systems.empty()) throw PreconditionError("topic '" + topic.id + "' has no system summaries");
  const auto d = text_to_distribution(topic.document_text(), vocab, tokenizer);
  std::vector<double> scores;
  for (const auto& r : topic.reference_summaries) scores.push_back(scorer(text_to_distribution(r, vocab, tokenizer), d));
  for (const auto& s : systems) scores.push_back(scorer(text_to_distribution(s, vocab, tokenizer), d));
  const auto ranks = descending_average_ranks(scores);
  double total = 0.0;
  for (std::size_t i = 0; i < topic.reference_summaries.size(); ++i) total += ranks[i];
  return total / static_cast<double>(topic.reference_summaries.size());
}

/// Clipped bigram recall of `candidate`, averaged over references. Stopwords
/// are removed first when the tokenizer config asks for it.
inline double rouge2_recall(std::string_view candidate, const std::vector<std::string>& references,
                            const TokenizerConfig& tokenizer) {
  if (references.empty()) throw std::invalid_argument("rouge2_recall: need at least one reference");
  auto bigrams = [&](std::string_view text) {
    const auto toks = tokenize(text, tokenizer);
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    for (std::size_t i = 0; i + 1 < toks.size(); ++i) ++counts[{toks[i], toks[i + 1]}];
    return std::pair{counts, toks.size() < 2 ? std::size_t{0} : toks.size() - 1};
  };
  const auto [cand, cand_total] = bigrams(candidate);
  double sum = 0.0;
  for (const auto& ref : references) {
    const auto [ref_counts, ref_total] = bigrams(ref);
    if (ref_total == 0) throw std::invalid_argument("rouge2_recall: reference has fewer than 2 tokens");
    std::size_t matched = 0;
    for (const auto& [bg, count] : ref_counts) {
      auto it = cand.find(bg);
      if (it != cand.end()) matched += std::min(count, it->second);
    }
    sum += static_cast<double>(matched) / static_cast<double>(ref_total);
  }
  return sum / static_cast<double>(references.size());
}

// ---------------------------------------------------------------------------

enum class Algorithm { ms_u, ms_d, pm, hreg, hpl };

inline std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::ms_u: return "ms-u";
    case Algorithm::ms_d: return "ms-d";
    case Algorithm::pm: return "pm";
    case Algorithm::hreg: return "hreg";
    case Algorithm::hpl: return "hpl";
  }
  return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view name) {
  for (auto a : {Algorithm::ms_u, Algorithm::ms_d, Algorithm::pm, Algorithm::hreg, Algorithm::hpl})
    if (algorithm_name(a) == name) return a;
  return std::nullopt;
}

// Everything the five inference algorithms may need.
struct InferenceConfig {
  ClosedFormConfig closed_form;  // prior is set from the algorithm
  TrainConfig train;
  ScoringConfig scoring;
  TokenizerConfig tokenizer;
};

inline KnowledgeModel fit_model(Algorithm algorithm, const Dataset& data, const Vocabulary& vocab,
                                const InferenceConfig& config) {
  switch (algorithm) {
    case Algorithm::ms_u: {
      auto c = config.closed_form;
      c.prior = Prior::uniform;
      return infer_ms_u(data, vocab, c, config.tokenizer);
    }
    case Algorithm::ms_d: {
      auto c = config.closed_form;
      c.prior = Prior::document;
      return infer_ms_d(data, vocab, c, config.tokenizer);
    }
    case Algorithm::pm: return infer_pm(data, vocab, config.train, config.scoring, config.tokenizer);
    case Algorithm::hreg: return infer_hreg(data, vocab, config.train, config.scoring, config.tokenizer);
    case Algorithm::hpl: return infer_hpl(data, vocab, config.train, config.scoring, config.tokenizer);
  }
  throw std::invalid_argument("unknown algorithm");
}

struct TopicEvaluation {
  std::string topic_id;
  int fold = -1;  // -1 when not cross-validated
  std::optional<double> kendall_tau;
  std::optional<double> reference_mean_rank;
};

struct EvalReport {
  std::vector<TopicEvaluation> per_topic;
  double mean_tau = std::nan("");
  double mean_mr = std::nan("");
  std::size_t n_topics = 0;
  std::size_t n_tau = 0;
  std::size_t n_mr = 0;
  nlohmann::json config = nlohmann::json::object();

  void aggregate() {
    n_topics = per_topic.size();
    double st = 0.0, sm = 0.0;
    n_tau = n_mr = 0;
    for (const auto& t : per_topic) {
      if (t.kendall_tau) st += *t.kendall_tau, ++n_tau;
      if (t.reference_mean_rank) sm += *t.reference_mean_rank, ++n_mr;
    }
    mean_tau = n_tau ? st / static_cast<double>(n_tau) : std::nan("");
    mean_mr = n_mr ? sm / static_cast<double>(n_mr) : std::nan("");
  }

  nlohmann::json to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
    auto num = [](double v) { return std::isnan(v) ? nlohmann::json() : nlohmann::json(v); };
    nlohmann::json topics = nlohmann::json::array();
    for (const auto& t : per_topic)
      topics.push_back({{"topic_id", t.topic_id},
                        {"fold", t.fold},
                        {"kendall_tau", opt(t.kendall_tau)},
                        {"reference_mean_rank", opt(t.reference_mean_rank)}});
    return {{"per_topic", topics},
            {"aggregate",
             {{"mean_tau", num(mean_tau)},
              {"mean_mr", num(mean_mr)},
              {"n_topics", n_topics},
              {"n_tau", n_tau},
              {"n_mr", n_mr}}},
            {"config", config}};
  }

  void write_csv(std::ostream& out) const {
    out << "topic_id,fold,kendall_tau,reference_mean_rank\n";
    auto cell = [](const std::optional<double>& v) {
      if (!v) return std::string();
      std::ostringstream s;
      s.precision(17);
      s << *v;
      return s.str();
    };
    for (const auto& t : per_topic)
      out << t.topic_id << ',' << t.fold << ',' << cell(t.kendall_tau) << ',' << cell(t.reference_mean_rank) << '\n';
  }
};

/// Per-topic tau (scores vs. human judgments over judged summaries) and
/// reference mean rank. Either is absent when the topic cannot support it.
inline TopicEvaluation evaluate_topic(const Topic& topic, const Scorer& scorer, const Vocabulary& vocab,
                                      const TokenizerConfig& tokenizer = {}) {
  TopicEvaluation ev;
  ev.topic_id = topic.id;
  if (topic.judged_summaries.size() >= 2) {
    const auto d = text_to_distribution(topic.document_text(), vocab, tokenizer);
    std::vector<double> predicted, human;
    for (const auto& j : topic.judged_summaries) {
      predicted.push_back(scorer(text_to_distribution(j.text, vocab, tokenizer), d));
      human.push_back(j.score);
    }
    try {
      ev.kendall_tau = kendall_tau(predicted, human);
    } catch (const std::invalid_argument&) {
    }
  }
  if (!topic.reference_summaries.empty() && !system_summaries(topic).empty())
    ev.reference_mean_rank = mean_reference_rank(topic, scorer, vocab, tokenizer);
  return ev;
}

inline EvalReport evaluate(const Dataset& dataset, const Scorer& scorer, const Vocabulary& vocab,
                           const TokenizerConfig& tokenizer = {}) {
  EvalReport report;
  for (const auto& topic : dataset.topics) report.per_topic.push_back(evaluate_topic(topic, scorer, vocab, tokenizer));
  report.aggregate();
  return report;
}

// Seeded shuffle of topic positions cut into `folds` contiguous blocks.
inline std::vector<std::vector<std::size_t>> fold_assignment(std::size_t n_topics, std::size_t folds,
                                                             std::uint64_t seed) {
  if (folds < 2) throw PreconditionError("cross-validation needs at least 2 folds");
  if (n_topics < folds)
    throw PreconditionError("cross-validation needs at least as many topics (" + std::to_string(n_topics) +
                            ") as folds (" + std::to_string(folds) + ")");
  std::vector<std::size_t> order(n_topics);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t begin = f * n_topics / folds;
    const std::size_t end = (f + 1) * n_topics / folds;
    out[f].assign(order.begin() + static_cast<std::ptrdiff_t>(begin), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

inline EvalReport cross_validate(const Dataset& dataset, Algorithm algorithm, std::size_t folds,
                                 const InferenceConfig& config, std::uint64_t seed) {
  const auto assignment = fold_assignment(dataset.topics.size(), folds, seed);
  if ((algorithm == Algorithm::hreg || algorithm == Algorithm::hpl) && !dataset.has_judgments())
    throw PreconditionError(algorithm_name(algorithm) + " requires judged summaries");
  const Vocabulary vocab = build_vocabulary(dataset, config.tokenizer);

  std::vector<std::optional<TopicEvaluation>> results(dataset.topics.size());
  for (std::size_t f = 0; f < folds; ++f) {
    Dataset train{dataset.name, {}};
    for (std::size_t g = 0; g < folds; ++g)
      if (g != f)
        for (std::size_t t : assignment[g]) train.topics.push_back(dataset.topics[t]);
    const auto model = fit_model(algorithm, train, vocab, config);
    const auto scorer = theta_scorer(model, config.scoring);
    for (std::size_t t : assignment[f]) {
      auto ev = evaluate_topic(dataset.topics[t], scorer, vocab, config.tokenizer);
      ev.fold = static_cast<int>(f);
      results[t] = std::move(ev);
    }
  }
  EvalReport report;
  for (auto& r : results) report.per_topic.push_back(std::move(*r));
  report.aggregate();
  report.config = {{"algorithm", algorithm_name(algorithm)},
                   {"folds", folds},
                   {"seed", seed},
                   {"alpha", config.scoring.alpha},
                   {"beta", config.scoring.beta},
                   {"epsilon", config.scoring.smoothing.epsilon}};
  return report;
}

}  // namespace klearn
