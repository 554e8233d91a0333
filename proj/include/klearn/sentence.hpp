#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace klearn {

inline const std::unordered_set<std::string>& default_abbreviations() {
  static const std::unordered_set<std::string> abbreviations = {
      "dr", "mr", "mrs", "ms", "prof", "st", "jr", "sr", "vs", "etc", "inc", "ltd", "co",
      "corp", "gen", "gov", "sen", "rep", "lt", "col", "capt", "sgt", "no", "fig", "e.g", "i.e"};
  return abbreviations;
}

// Rule-based splitter: a sentence ends at '.', '!' or '?' followed by
// whitespace and then an uppercase letter or digit, unless the word before a
// period is a known abbreviation. Empty pieces are dropped.
inline std::vector<std::string> split_text_sentences(
    std::string_view text, const std::unordered_set<std::string>& abbreviations = default_abbreviations()) {
  std::vector<std::string> out;
  auto push = [&](std::string_view piece) {
    const auto first = piece.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return;
    const auto last = piece.find_last_not_of(" \t\r\n");
    out.emplace_back(piece.substr(first, last - first + 1));
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    if (j >= text.size() || !std::isspace(static_cast<unsigned char>(text[j]))) continue;
    while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j >= text.size()) continue;
    const auto next = static_cast<unsigned char>(text[j]);
    if (!std::isupper(next) && !std::isdigit(next)) continue;
    if (c == '.') {
      std::size_t w = i;
      while (w > start && !std::isspace(static_cast<unsigned char>(text[w - 1]))) --w;
      std::string word;
      for (std::size_t p = w; p < i; ++p)
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[p]))));
      if (abbreviations.contains(word)) continue;
    }
    push(text.substr(start, i + 1 - start));
    start = j;
    i = j - 1;
  }
  push(text.substr(start));
  return out;
}

}  // namespace klearn
