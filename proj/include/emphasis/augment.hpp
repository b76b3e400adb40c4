#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "emphasis/corpus.hpp"
#include "emphasis/errors.hpp"
#include "emphasis/rng.hpp"
#include "emphasis/utf8.hpp"

namespace emphasis {

/// Trigger probabilities: word removal and uppercasing per word, reversal per sentence.
struct AugmentConfig {
  double p_remove = 0.01;
  double p_upper = 0.05;
  double p_reverse = 0.10;

  void validate() const {
    for (double p : {p_remove, p_upper, p_reverse}) {
      if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("augmentation probabilities must lie in [0, 1]");
    }
  }

  bool is_identity() const noexcept { return p_remove == 0.0 && p_upper == 0.0 && p_reverse == 0.0; }

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

/// remove -> uppercase -> reverse, each trigger independent. One uniform draw
/// per word per pass and one per sentence, regardless of the probabilities.
/// If removal would delete every word, it is undone.
inline Sentence augment_sentence(const Sentence& sentence, const AugmentConfig& config, Rng& rng) {
  config.validate();
  Sentence out;
  out.id = sentence.id;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (!rng.bernoulli(config.p_remove)) {
      out.words.push_back(sentence.words[i]);
      out.gold.push_back(sentence.gold[i]);
    }
  }
  if (out.words.empty()) {
    out.words = sentence.words;
    out.gold = sentence.gold;
  }
  for (auto& w : out.words) {
    if (rng.bernoulli(config.p_upper)) w = utf8::to_upper(w);
  }
  if (rng.bernoulli(config.p_reverse)) {
    std::reverse(out.words.begin(), out.words.end());
    std::reverse(out.gold.begin(), out.gold.end());
  }
  return out;
}

/// Sentence i draws from Rng(hash64(seed, i)), so results do not depend on
/// processing order.
inline Corpus augment_epoch(const Corpus& corpus, const AugmentConfig& config, std::uint64_t seed) {
  config.validate();
  std::vector<Sentence> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Rng rng(hash64(seed, {0x61756775ULL, i}));
    out.push_back(augment_sentence(corpus[i], config, rng));
  }
  return Corpus(std::move(out));
}

}  // namespace emphasis
