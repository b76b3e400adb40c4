#pragma once

#include <algorithm>
#include <cctype>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "emphasis/corpus.hpp"
#include "emphasis/errors.hpp"
#include "emphasis/features.hpp"
#include "emphasis/rng.hpp"
#include "emphasis/utf8.hpp"

namespace emphasis {

inline constexpr std::string_view kContinuation = "##";
inline constexpr std::string_view kDefaultUnk = "[UNK]";

/// WordPiece inventory. Piece 0 is the unknown piece; ids are positions.
class Vocab {
 public:
  Vocab() = default;

  /// First element is the unknown piece. Rejects duplicates, empty pieces and
  /// bare "##".
  explicit Vocab(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
    if (pieces_.empty()) throw ValidationError("vocab must contain at least the unknown piece");
    index_.reserve(pieces_.size());
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const auto& p = pieces_[i];
      if (p.empty()) throw ValidationError("vocab piece " + std::to_string(i) + " is empty");
      if (i > 0 && p == kContinuation) throw ValidationError("continuation piece without content");
      if (!index_.emplace(p, static_cast<std::int32_t>(i)).second) {
        throw ValidationError("duplicate vocab piece '" + p + "'");
      }
      const bool cont = i > 0 && p.starts_with(kContinuation);
      const std::string_view body = cont ? std::string_view(p).substr(kContinuation.size()) : std::string_view(p);
      max_piece_bytes_ = std::max(max_piece_bytes_, body.size());
    }
  }

  const std::string& unk() const { return pieces_.front(); }
  static constexpr std::int32_t unk_id() noexcept { return 0; }

  std::size_t size() const noexcept { return pieces_.size(); }
  const std::vector<std::string>& pieces() const noexcept { return pieces_; }
  const std::string& piece(std::int32_t id) const { return pieces_.at(static_cast<std::size_t>(id)); }

  /// Id of an exact piece string, or -1.
  std::int32_t find(const std::string& piece) const {
    auto it = index_.find(piece);
    return it == index_.end() ? -1 : it->second;
  }
  bool contains(const std::string& piece) const { return find(piece) >= 0; }

  std::size_t max_piece_bytes() const noexcept { return max_piece_bytes_; }

  /// FNV-1a over the newline-joined pieces; identifies a vocab in checkpoints.
  std::uint64_t hash() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : pieces_) {
      h = fnv1a64(p, h);
      h = fnv1a64("\n", h);
    }
    return h;
  }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.pieces_ == b.pieces_; }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, std::int32_t> index_;
  std::size_t max_piece_bytes_ = 0;
};

/// Splits ASCII punctuation off as single-character segments, so "#plantgang"
/// becomes "#" and "plantgang". Each segment is word-initial for WordPiece.
inline std::vector<std::string_view> pre_split(std::string_view word) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < word.size(); ++i) {
    const auto c = static_cast<unsigned char>(word[i]);
    if (c >= 0x80 || !std::ispunct(c)) continue;
    if (i > start) out.push_back(word.substr(start, i - start));
    out.push_back(word.substr(i, 1));
    start = i + 1;
  }
  if (start < word.size()) out.push_back(word.substr(start));
  return out;
}

struct VocabOptions {
  std::string unk{kDefaultUnk};
  std::size_t max_piece_chars = 16;  // longest merged piece, in code points
};

/// Frequency-ranked inventory: every character seen (initial and "##" forms),
/// then multi-character substrings by occurrence count until max_size pieces.
/// Substrings starting at a word's first character are initial pieces; all
/// others are continuation pieces. Ties: longer first, then bytewise.
inline Vocab build_vocab(const Corpus& corpus, std::size_t max_size, const VocabOptions& opts = {}) {
  if (corpus.empty()) throw ArgumentError("build_vocab needs a non-empty corpus");

  std::map<std::string, std::size_t> chars;  // ordered: base inventory is sorted
  std::unordered_map<std::string, std::size_t> merged;
  for (const auto& s : corpus) {
    for (const auto& word : s.words) {
      for (const auto w : pre_split(word)) {
        const auto cut = utf8::boundaries(w);
        const std::size_t n = cut.size() - 1;
        for (std::size_t i = 0; i < n; ++i) {
          chars[std::string(w.substr(cut[i], cut[i + 1] - cut[i]))] += 1;
          const std::size_t last = std::min(n, i + opts.max_piece_chars);
          for (std::size_t j = i + 2; j <= last; ++j) {
            std::string piece = i == 0 ? std::string() : std::string(kContinuation);
            piece.append(w.substr(cut[i], cut[j] - cut[i]));
            merged[piece] += 1;
          }
        }
      }
    }
  }

  const std::size_t base = 1 + 2 * chars.size();
  if (max_size < base) {
    throw ArgumentError("max_size " + std::to_string(max_size) + " is below the character inventory of " +
                        std::to_string(base) + " pieces");
  }

  std::vector<std::string> pieces;
  pieces.reserve(max_size);
  pieces.push_back(opts.unk);
  for (const auto& [c, _] : chars) pieces.push_back(c);
  for (const auto& [c, _] : chars) pieces.push_back(std::string(kContinuation) + c);

  std::vector<std::pair<std::string, std::size_t>> ranked(merged.begin(), merged.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
    return a.first < b.first;
  });
  for (const auto& [piece, _] : ranked) {
    if (pieces.size() >= max_size) break;
    if (piece == opts.unk) continue;
    pieces.push_back(piece);
  }
  return Vocab(std::move(pieces));
}

/// Plain text, one piece per line, unknown piece first.
inline Vocab read_vocab(std::istream& in) {
  std::vector<std::string> pieces;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pieces.push_back(line);
  }
  return Vocab(std::move(pieces));
}

inline Vocab load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocab file " + path.string());
  return read_vocab(in);
}

inline void write_vocab(std::ostream& out, const Vocab& vocab) {
  for (const auto& p : vocab.pieces()) out << p << '\n';
}

inline void save_vocab(const std::filesystem::path& path, const Vocab& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocab file " + path.string());
  write_vocab(out, vocab);
  if (!out) throw IoError("write failed: " + path.string());
}

/// Greedy longest-match-first WordPiece over the pre_split segments. Any
/// unmatched position maps the whole word to the unknown piece.
inline std::vector<std::int32_t> tokenize_word_ids(const Vocab& vocab, std::string_view word) {
  std::vector<std::int32_t> ids;
  std::string candidate;
  for (const auto segment : pre_split(word)) {
    const auto cut = utf8::boundaries(segment);
    const std::size_t n = cut.size() - 1;
    std::size_t start = 0;
    while (start < n) {
      std::int32_t hit = -1;
      std::size_t end = n;
      while (end > start && cut[end] - cut[start] > vocab.max_piece_bytes()) --end;
      for (; end > start; --end) {
        candidate.assign(start == 0 ? std::string_view() : kContinuation);
        candidate.append(segment.substr(cut[start], cut[end] - cut[start]));
        hit = vocab.find(candidate);
        if (hit > 0) break;
      }
      if (hit <= 0) return {Vocab::unk_id()};
      ids.push_back(hit);
      start = end;
    }
  }
  if (ids.empty()) return {Vocab::unk_id()};
  return ids;
}

inline std::vector<std::string> tokenize_word(const Vocab& vocab, std::string_view word) {
  std::vector<std::string> out;
  for (auto id : tokenize_word_ids(vocab, word)) out.push_back(vocab.piece(id));
  return out;
}

/// Half-open token range [begin, end) owned by one source word.
struct WordSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const WordSpan&, const WordSpan&) = default;
};

using FeatureVector = std::array<double, LexicalFeatures::kWidth>;

/// A sentence lowered to subword tokens. Every token of a word carries that
/// word's target and feature vector.
struct SubwordSequence {
  std::vector<std::string> tokens;
  std::vector<std::int32_t> ids;
  std::vector<WordSpan> word_spans;
  std::vector<double> targets;
  std::vector<FeatureVector> features;

  std::size_t size() const noexcept { return tokens.size(); }
  std::size_t word_count() const noexcept { return word_spans.size(); }
};

inline SubwordSequence encode_sentence(const Vocab& vocab, const Sentence& sentence) {
  validate(sentence);
  SubwordSequence seq;
  for (std::size_t w = 0; w < sentence.size(); ++w) {
    const auto ids = tokenize_word_ids(vocab, sentence.words[w]);
    const FeatureVector feat = extract_features(sentence.words[w]).as_vector();
    const std::size_t begin = seq.tokens.size();
    for (auto id : ids) {
      seq.ids.push_back(id);
      seq.tokens.push_back(vocab.piece(id));
      seq.targets.push_back(sentence.gold[w]);
      seq.features.push_back(feat);
    }
    seq.word_spans.push_back({begin, seq.tokens.size()});
  }
  return seq;
}

/// Word score = mean of its tokens' scores. Computed as x0 + sum(x_i - x0)/n,
/// which is exact when all of a word's scores are equal.
inline std::vector<double> aggregate_scores(const SubwordSequence& seq, std::span<const double> subword_scores) {
  if (subword_scores.size() != seq.size()) {
    throw ArgumentError("aggregate_scores: " + std::to_string(subword_scores.size()) + " scores for " +
                        std::to_string(seq.size()) + " tokens");
  }
  std::vector<double> out;
  out.reserve(seq.word_count());
  for (const auto& span : seq.word_spans) {
    const double first = subword_scores[span.begin];
    double delta = 0.0;
    for (std::size_t t = span.begin + 1; t < span.end; ++t) delta += subword_scores[t] - first;
    out.push_back(first + delta / static_cast<double>(span.size()));
  }
  return out;
}

}  // namespace emphasis
