#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "emphasis/corpus.hpp"
#include "emphasis/rng.hpp"
#include "emphasis/utf8.hpp"

namespace emphasis {

/// Small deterministic corpus for smoke tests and demos. Each lexicon word has
/// one fixed, distinct emphasis value; high-value words are more often
/// hashtags or capitalized. Gold values carry 6 decimals so the file form
/// round-trips exactly.
inline Corpus synthetic_corpus(std::size_t n_sentences = 32, std::uint64_t seed = 2020,
                               std::size_t lexicon_size = 48) {
  static constexpr std::string_view kOnsets = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  Rng rng(hash64(seed, {0x73796e74ULL}));

  std::vector<std::string> lexicon;
  std::unordered_set<std::string> seen;
  while (lexicon.size() < lexicon_size) {
    std::string w;
    const std::size_t syllables = 2 + rng.below(2);
    for (std::size_t s = 0; s < syllables; ++s) {
      w.push_back(kOnsets[rng.below(kOnsets.size())]);
      w.push_back(kVowels[rng.below(kVowels.size())]);
    }
    if (seen.insert(w).second) lexicon.push_back(w);
  }

  std::vector<double> value(lexicon_size);
  for (std::size_t i = 0; i < lexicon_size; ++i) {
    value[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(lexicon_size);
  }
  for (std::size_t i = lexicon_size; i > 1; --i) std::swap(value[i - 1], value[rng.below(i)]);
  for (std::size_t i = 0; i < lexicon_size; ++i) {
    value[i] = std::stod(format_fixed(value[i], 6));
    if (value[i] > 0.75 && rng.bernoulli(0.5)) lexicon[i] = "#" + lexicon[i];
    else if (value[i] > 0.5 && rng.bernoulli(0.5)) lexicon[i][0] = static_cast<char>(lexicon[i][0] - 'a' + 'A');
    else if (value[i] > 0.6 && rng.bernoulli(0.3)) lexicon[i] = utf8::to_upper(lexicon[i]);
  }

  std::vector<Sentence> sentences;
  for (std::size_t s = 0; s < n_sentences; ++s) {
    const std::size_t len = 3 + rng.below(6);
    std::vector<std::size_t> pick(lexicon_size);
    for (std::size_t i = 0; i < lexicon_size; ++i) pick[i] = i;
    for (std::size_t i = 0; i < len; ++i) std::swap(pick[i], pick[i + rng.below(lexicon_size - i)]);
    Sentence sent;
    sent.id = "syn" + std::to_string(s);
    for (std::size_t i = 0; i < len; ++i) {
      sent.words.push_back(lexicon[pick[i]]);
      sent.gold.push_back(value[pick[i]]);
    }
    sentences.push_back(std::move(sent));
  }
  return Corpus(std::move(sentences));
}

}  // namespace emphasis
