#pragma once

#include <vector>

#include "klearn/corpus.hpp"
#include "klearn/distribution.hpp"
#include "klearn/error.hpp"

namespace klearn {

// One observed (document, reference summary) pair.
struct SummaryPair {
  std::size_t topic = 0;
  UnitDistribution document;
  UnitDistribution summary;
};

// One pair per (topic, reference summary). Every topic must have a reference.
inline std::vector<SummaryPair> reference_pairs(const Dataset& dataset, const Vocabulary& vocab,
                                                const TokenizerConfig& tokenizer) {
  std::vector<SummaryPair> pairs;
  for (std::size_t t = 0; t < dataset.topics.size(); ++t) {
    const Topic& topic = dataset.topics[t];
    if (topic.reference_summaries.empty())
      throw PreconditionError("topic '" + topic.id + "' has no reference summary");
    const auto d = text_to_distribution(topic.document_text(), vocab, tokenizer);
    for (const auto& ref : topic.reference_summaries)
      pairs.push_back({t, d, text_to_distribution(ref, vocab, tokenizer)});
  }
  if (pairs.empty()) throw PreconditionError("dataset has no topics");
  return pairs;
}

}  // namespace klearn
