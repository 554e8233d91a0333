#pragma once

// The knowledge-aware summary score and its distribution-based baselines.
//
//   theta_K(S) = H(S) - alpha * KL(S||D) + beta * KL(S||K)
//
// Higher is better for every scorer in this header, including the negated
// divergence baselines.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "klearn/corpus.hpp"
#include "klearn/distribution.hpp"
#include "klearn/error.hpp"

namespace klearn {

struct Provenance {
  std::string algorithm;
  nlohmann::json hyperparams = nlohmann::json::object();
  std::string data_slice;
  std::uint64_t seed = 0;
  // Algorithm-specific records: loss traces, logits, averaged constituents.
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const {
    nlohmann::json j = extra;
    j["algorithm"] = algorithm;
    j["hyperparams"] = hyperparams;
    j["data_slice"] = data_slice;
    j["seed"] = seed;
    return j;
  }

  static Provenance from_json(const nlohmann::json& j) {
    Provenance p;
    if (!j.is_object()) return p;
    p.extra = j;
    if (j.contains("algorithm")) p.algorithm = j["algorithm"].get<std::string>();
    if (j.contains("hyperparams")) p.hyperparams = j["hyperparams"];
    if (j.contains("data_slice")) p.data_slice = j["data_slice"].get<std::string>();
    if (j.contains("seed")) p.seed = j["seed"].get<std::uint64_t>();
    for (const char* key : {"algorithm", "hyperparams", "data_slice", "seed"}) p.extra.erase(key);
    return p;
  }
};

/// A fitted background-knowledge distribution over a vocabulary. Immutable.
class KnowledgeModel {
 public:
  KnowledgeModel(UnitDistribution k, Vocabulary vocab, Provenance provenance = {})
      : k_(std::move(k)), vocab_(std::move(vocab)), provenance_(std::move(provenance)) {
    if (k_.size() != vocab_.size())
      throw std::invalid_argument("knowledge distribution length does not match vocabulary size");
  }

  const UnitDistribution& k() const { return k_; }
  const Vocabulary& vocab() const { return vocab_; }
  const Provenance& provenance() const { return provenance_; }

  // Re-expresses the model over `target`. Units unknown to `target` are
  // dropped and the rest renormalized; target units unknown to the model are
  // an error.
  KnowledgeModel aligned_to(const Vocabulary& target) const {
    if (target == vocab_) return *this;
    std::vector<double> w(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
      auto idx = vocab_.index_of(target.unit(i));
      if (!idx) throw DataError("knowledge model has no unit '" + target.unit(i) + "'");
      w[i] = k_[*idx];
    }
    return KnowledgeModel(UnitDistribution::from_weights(w), target, provenance_);
  }

  nlohmann::json to_json() const {
    return {{"units", vocab_.units()},
            {"probs", std::vector<double>(k_.probs().begin(), k_.probs().end())},
            {"provenance", provenance_.to_json()}};
  }

  static KnowledgeModel from_json(const nlohmann::json& j) {
    try {
      auto units = j.at("units").get<std::vector<std::string>>();
      auto probs = j.at("probs").get<std::vector<double>>();
      if (units.size() != probs.size()) throw DataError("units and probs lengths differ");
      double sum = 0.0;
      for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0) throw DataError("probs must be finite and nonnegative");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-6)
        throw DataError("probs must sum to 1 within 1e-6 (got " + std::to_string(sum) + ")");
      Provenance prov = j.contains("provenance") ? Provenance::from_json(j["provenance"]) : Provenance{};
      return KnowledgeModel(UnitDistribution::from_weights(probs), Vocabulary(std::move(units)),
                            std::move(prov));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("invalid knowledge model: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("invalid knowledge model: ") + e.what());
    }
  }

 private:
  UnitDistribution k_;
  Vocabulary vocab_;
  Provenance provenance_;
};

inline KnowledgeModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return KnowledgeModel::from_json(j);
}

inline void save_model(const std::string& path, const KnowledgeModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path);
  out << model.to_json().dump(2) << '\n';
}

inline KnowledgeModel uniform_model(const Vocabulary& vocab) {
  Provenance prov;
  prov.algorithm = "uniform";
  return KnowledgeModel(UnitDistribution::uniform(vocab.size()), vocab, prov);
}

// ---------------------------------------------------------------------------

inline double theta(const UnitDistribution& s, const UnitDistribution& d, const UnitDistribution& k,
                    const ScoringConfig& config = {}) {
  detail::require_same_length(s.size(), d.size());
  detail::require_same_length(s.size(), k.size());
  return entropy(s) - config.alpha * kl(s, d, config.smoothing) +
         config.beta * kl(s, k, config.smoothing);
}

inline double theta(const UnitDistribution& s, const UnitDistribution& d, const KnowledgeModel& model,
                    const ScoringConfig& config = {}) {
  return theta(s, d, model.k(), config);
}

enum class BaselineKind { kl_sd, js_sd, theta_uniform, theta_idf };

inline double baseline_score(const UnitDistribution& s, const UnitDistribution& d, BaselineKind kind,
                             const KnowledgeModel* idf_model, const ScoringConfig& config = {}) {
  switch (kind) {
    case BaselineKind::kl_sd:
      return -kl(s, d, config.smoothing);
    case BaselineKind::js_sd:
      return -js(s, d);
    case BaselineKind::theta_uniform:
      return theta(s, d, UnitDistribution::uniform(s.size()), config);
    case BaselineKind::theta_idf:
      if (idf_model == nullptr) throw PreconditionError("theta_idf baseline requires an IDF model");
      return theta(s, d, idf_model->k(), config);
  }
  throw std::invalid_argument("unknown baseline kind");
}

// Scores a summary distribution against its document distribution.
using Scorer = std::function<double(const UnitDistribution& s, const UnitDistribution& d)>;

inline Scorer theta_scorer(KnowledgeModel model, ScoringConfig config = {}) {
  return [model = std::move(model), config](const UnitDistribution& s, const UnitDistribution& d) {
    return theta(s, d, model, config);
  };
}

inline Scorer baseline_scorer(BaselineKind kind, std::optional<KnowledgeModel> idf_model = std::nullopt,
                              ScoringConfig config = {}) {
  if (kind == BaselineKind::theta_idf && !idf_model)
    throw PreconditionError("theta_idf baseline requires an IDF model");
  return [kind, idf = std::move(idf_model), config](const UnitDistribution& s, const UnitDistribution& d) {
    return baseline_score(s, d, kind, idf ? &*idf : nullptr, config);
  };
}

/// Background knowledge proportional to add-one document frequency in a
/// background corpus (one document per entry).
inline KnowledgeModel document_frequency_model(const std::vector<std::string>& background,
                                               const Vocabulary& vocab, const TokenizerConfig& tokenizer) {
  std::vector<double> df(vocab.size(), 1.0);
  std::vector<char> seen(vocab.size());
  for (const auto& doc : background) {
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t i : encode(doc, vocab, tokenizer)) {
      if (!seen[i]) {
        seen[i] = 1;
        df[i] += 1.0;
      }
    }
  }
  Provenance prov;
  prov.algorithm = "idf";
  prov.hyperparams = {{"background_documents", background.size()}, {"df_smoothing", 1}};
  return KnowledgeModel(UnitDistribution::from_weights(df), vocab, prov);
}

// ---------------------------------------------------------------------------

// Candidate summaries of a topic in ranking order of indices: reference
// summaries first, then judged summaries.
inline std::vector<std::string> candidate_summaries(const Topic& topic) {
  std::vector<std::string> out = topic.reference_summaries;
  for (const auto& j : topic.judged_summaries) out.push_back(j.text);
  return out;
}

struct RankedSummary {
  std::size_t index = 0;
  double score = 0.0;
};

inline std::vector<RankedSummary> rank_summaries(const Topic& topic, const Scorer& scorer,
                                                 const Vocabulary& vocab,
                                                 const TokenizerConfig& tokenizer = {}) {
  const auto texts = candidate_summaries(topic);
  if (texts.empty()) throw PreconditionError("topic '" + topic.id + "' has no summaries to rank");
  const auto d = text_to_distribution(topic.document_text(), vocab, tokenizer);
  std::vector<RankedSummary> ranked;
  ranked.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i)
    ranked.push_back({i, scorer(text_to_distribution(texts[i], vocab, tokenizer), d)});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedSummary& a, const RankedSummary& b) { return a.score > b.score; });
  return ranked;
}

}  // namespace klearn
