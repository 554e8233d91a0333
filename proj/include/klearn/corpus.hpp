#pragma once

// Dataset ingestion: tokenization, vocabularies, the JSONL topic format, and
// conversion of raw text into unit distributions.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "klearn/distribution.hpp"
#include "klearn/error.hpp"

namespace klearn {

inline const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> words = {
      "a",       "about",   "above", "after",  "again",  "against", "all",   "am",    "an",
      "and",     "any",     "are",   "as",     "at",     "be",      "because", "been", "before",
      "being",   "below",   "between", "both", "but",    "by",      "can",   "could", "did",
      "do",      "does",    "doing", "down",   "during", "each",    "few",   "for",   "from",
      "further", "had",     "has",   "have",   "having", "he",      "her",   "here",  "hers",
      "herself", "him",     "himself", "his",  "how",    "i",       "if",    "in",    "into",
      "is",      "it",      "its",   "itself", "just",   "me",      "more",  "most",  "my",
      "myself",  "no",      "nor",   "not",    "now",    "of",      "off",   "on",    "once",
      "only",    "or",      "other", "our",    "ours",   "ourselves", "out", "over",  "own",
      "same",    "she",     "should", "so",    "some",   "such",    "than",  "that",  "the",
      "their",   "theirs",  "them",  "themselves", "then", "there", "these", "they",  "this",
      "those",   "through", "to",    "too",    "under",  "until",   "up",    "very",  "was",
      "we",      "were",    "what",  "when",   "where",  "which",   "while", "who",   "whom",
      "why",     "will",    "with",  "would",  "you",    "your",    "yours", "yourself",
      "yourselves", "s",    "t",     "also",   "said",   "says",    "one"};
  return words;
}

struct TokenizerConfig {
  bool lowercase = true;
  bool remove_stopwords = false;
  std::unordered_set<std::string> stopwords = default_stopwords();
  // Vocabulary construction only: drop units seen fewer times than this.
  std::size_t min_count = 1;
};

// Splits on runs of non-alphanumeric ASCII bytes. Bytes >= 0x80 are kept inside
// tokens so UTF-8 words are never cut apart. Only ASCII letters are lowercased.
inline std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config = {}) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    if (!(config.remove_stopwords && config.stopwords.contains(current)))
      tokens.push_back(current);
    current.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      current.push_back(config.lowercase ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

/// Bijection between unit strings and dense indices.
class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(std::vector<std::string> units) : units_(std::move(units)) {
    if (units_.empty()) throw std::invalid_argument("vocabulary must contain at least one unit");
    index_.reserve(units_.size());
    for (std::size_t i = 0; i < units_.size(); ++i) {
      if (!index_.emplace(units_[i], i).second)
        throw std::invalid_argument("duplicate vocabulary unit: " + units_[i]);
    }
  }

  std::size_t size() const { return units_.size(); }
  const std::string& unit(std::size_t i) const { return units_.at(i); }
  const std::vector<std::string>& units() const { return units_; }

  std::optional<std::size_t> index_of(std::string_view unit) const {
    auto it = index_.find(std::string(unit));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const Vocabulary& other) const { return units_ == other.units_; }

 private:
  std::vector<std::string> units_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct JudgedSummary {
  std::string text;
  double score = 0.0;
  std::optional<std::string> annotator;

  bool operator==(const JudgedSummary&) const = default;
};

struct Topic {
  std::string id;
  std::vector<std::string> documents;
  std::vector<std::string> reference_summaries;
  std::vector<JudgedSummary> judged_summaries;
  std::map<std::string, std::string> tags;

  // Documents of a multi-document topic are scored as one concatenated text.
  std::string document_text() const {
    std::string out;
    for (const auto& doc : documents) {
      if (!out.empty()) out.push_back('\n');
      out += doc;
    }
    return out;
  }

  void validate() const {
    if (documents.empty()) throw DataError("topic '" + id + "' has no documents");
    for (const auto& j : judged_summaries) {
      if (!std::isfinite(j.score))
        throw DataError("topic '" + id + "' has a judged summary with a non-finite score");
      if (j.annotator && j.annotator->empty())
        throw DataError("topic '" + id + "' has a judged summary with an empty annotator");
    }
  }

  bool operator==(const Topic&) const = default;
};

struct Dataset {
  std::string name;
  std::vector<Topic> topics;

  bool has_judgments() const {
    return std::any_of(topics.begin(), topics.end(),
                       [](const Topic& t) { return !t.judged_summaries.empty(); });
  }

  bool operator==(const Dataset&) const = default;
};

// ---------------------------------------------------------------------------
// JSONL serialization

inline nlohmann::json topic_to_json(const Topic& topic) {
  nlohmann::json judged = nlohmann::json::array();
  for (const auto& j : topic.judged_summaries) {
    judged.push_back({{"text", j.text},
                      {"score", j.score},
                      {"annotator", j.annotator ? nlohmann::json(*j.annotator) : nlohmann::json()}});
  }
  return {{"id", topic.id},
          {"documents", topic.documents},
          {"reference_summaries", topic.reference_summaries},
          {"judged_summaries", judged},
          {"tags", topic.tags}};
}

inline Topic topic_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("topic must be a JSON object");
  for (const char* key : {"id", "documents", "reference_summaries"})
    if (!j.contains(key)) throw DataError(std::string("missing required key \"") + key + "\"");
  Topic topic;
  try {
    topic.id = j.at("id").get<std::string>();
    topic.documents = j.at("documents").get<std::vector<std::string>>();
    topic.reference_summaries = j.at("reference_summaries").get<std::vector<std::string>>();
    if (j.contains("judged_summaries")) {
      for (const auto& js : j.at("judged_summaries")) {
        JudgedSummary summary;
        summary.text = js.at("text").get<std::string>();
        summary.score = js.at("score").get<double>();
        if (js.contains("annotator") && !js.at("annotator").is_null())
          summary.annotator = js.at("annotator").get<std::string>();
        topic.judged_summaries.push_back(std::move(summary));
      }
    }
    if (j.contains("tags")) topic.tags = j.at("tags").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(e.what());
  }
  topic.validate();
  return topic;
}

inline Dataset parse_dataset(std::istream& in, std::string name = {}) {
  Dataset dataset{std::move(name), {}};
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Topic topic;
    try {
      topic = topic_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(topic.id).second)
      throw DataError("line " + std::to_string(line_no) + ": duplicate topic id '" + topic.id + "'");
    dataset.topics.push_back(std::move(topic));
  }
  return dataset;
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file: " + path);
  return parse_dataset(in, path);
}

inline void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (const auto& topic : dataset.topics) out << topic_to_json(topic).dump() << '\n';
}

inline void save_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset file: " + path);
  write_dataset(out, dataset);
}

// ---------------------------------------------------------------------------
// Vocabulary and distributions

// Every text of a topic: documents, references, then judged summaries.
template <typename Fn>
void for_each_text(const Topic& topic, Fn&& fn) {
  for (const auto& t : topic.documents) fn(t);
  for (const auto& t : topic.reference_summaries) fn(t);
  for (const auto& j : topic.judged_summaries) fn(j.text);
}

/// Units ordered by descending total count, ties broken lexicographically.
inline Vocabulary build_vocabulary(const Dataset& dataset, const TokenizerConfig& config) {
  if (dataset.topics.empty()) throw PreconditionError("cannot build a vocabulary from an empty dataset");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& topic : dataset.topics)
    for_each_text(topic, [&](const std::string& text) {
      for (auto& tok : tokenize(text, config)) ++counts[std::move(tok)];
    });
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (auto& [unit, count] : counts)
    if (count >= config.min_count) entries.emplace_back(unit, count);
  if (entries.empty()) throw PreconditionError("vocabulary is empty after filtering");
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> units;
  units.reserve(entries.size());
  for (auto& e : entries) units.push_back(std::move(e.first));
  return Vocabulary(std::move(units));
}

// In-vocabulary unit indices of a text, in order. Out-of-vocabulary tokens are dropped.
inline std::vector<std::size_t> encode(std::string_view text, const Vocabulary& vocab,
                                       const TokenizerConfig& config = {}) {
  std::vector<std::size_t> out;
  for (const auto& tok : tokenize(text, config))
    if (auto idx = vocab.index_of(tok)) out.push_back(*idx);
  return out;
}

// Uniform with the empty-support flag when `indices` is empty.
inline UnitDistribution distribution_from_indices(std::span<const std::size_t> indices, std::size_t n) {
  if (indices.empty()) return UnitDistribution::uniform(n, true);
  std::vector<double> counts(n, 0.0);
  for (std::size_t i : indices) counts.at(i) += 1.0;
  return UnitDistribution::from_weights(counts);
}

inline UnitDistribution text_to_distribution(std::string_view text, const Vocabulary& vocab,
                                             const TokenizerConfig& config = {}) {
  if (vocab.size() == 0) throw std::invalid_argument("vocabulary is empty");
  const auto idx = encode(text, vocab, config);
  return distribution_from_indices(idx, vocab.size());
}

}  // namespace klearn
