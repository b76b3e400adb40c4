#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "emphasis/errors.hpp"
#include "emphasis/features.hpp"
#include "emphasis/rng.hpp"
#include "emphasis/utf8.hpp"

namespace emphasis {

/// One annotated short text: words with per-word gold emphasis probabilities.
struct Sentence {
  std::string id;
  std::vector<std::string> words;
  std::vector<double> gold;

  std::size_t size() const noexcept { return words.size(); }

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

inline void validate(const Sentence& s) {
  if (s.words.empty()) throw ValidationError("sentence '" + s.id + "' has no words");
  if (s.words.size() != s.gold.size()) {
    throw ValidationError("sentence '" + s.id + "': " + std::to_string(s.words.size()) + " words but " +
                          std::to_string(s.gold.size()) + " probabilities");
  }
  for (const auto& w : s.words) {
    if (w.empty()) throw ValidationError("sentence '" + s.id + "' contains an empty word");
    if (utf8::contains_space(w)) throw ValidationError("sentence '" + s.id + "': word contains whitespace");
  }
  for (double g : s.gold) {
    if (!(g >= 0.0 && g <= 1.0)) {
      throw ValidationError("sentence '" + s.id + "': probability " + std::to_string(g) + " outside [0,1]");
    }
  }
}

/// Ordered, validated collection of sentences with unique ids. Immutable.
class Corpus {
 public:
  Corpus() = default;

  explicit Corpus(std::vector<Sentence> sentences) : sentences_(std::move(sentences)) {
    std::unordered_set<std::string> seen;
    seen.reserve(sentences_.size());
    for (const auto& s : sentences_) {
      validate(s);
      if (!seen.insert(s.id).second) throw ValidationError("duplicate sentence id '" + s.id + "'");
    }
  }

  std::span<const Sentence> sentences() const noexcept { return sentences_; }
  const Sentence& operator[](std::size_t i) const { return sentences_[i]; }
  std::size_t size() const noexcept { return sentences_.size(); }
  bool empty() const noexcept { return sentences_.empty(); }
  auto begin() const noexcept { return sentences_.begin(); }
  auto end() const noexcept { return sentences_.end(); }

  /// Sub-corpus of the given indices, in the order given.
  Corpus subset(std::span<const std::size_t> indices) const {
    std::vector<Sentence> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(sentences_.at(i));
    return Corpus(std::move(out));
  }

  std::size_t word_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sentences_) n += s.size();
    return n;
  }

 private:
  std::vector<Sentence> sentences_;
};

// --- JSON-lines I/O -------------------------------------------------------

inline Sentence parse_sentence(const std::string& line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_no, "record is not an object");
  for (const char* key : {"id", "words", "probs"}) {
    if (!j.contains(key)) throw ParseError(line_no, std::string("missing key '") + key + "'");
  }
  const auto& id = j["id"];
  const auto& words = j["words"];
  const auto& probs = j["probs"];
  if (!id.is_string()) throw ParseError(line_no, "'id' must be a string");
  if (!words.is_array()) throw ParseError(line_no, "'words' must be an array");
  if (!probs.is_array()) throw ParseError(line_no, "'probs' must be an array");

  Sentence s;
  s.id = id.get<std::string>();
  for (const auto& w : words) {
    if (!w.is_string()) throw ParseError(line_no, "'words' entries must be strings");
    s.words.push_back(w.get<std::string>());
  }
  for (const auto& p : probs) {
    if (!p.is_number()) throw ParseError(line_no, "'probs' entries must be numbers");
    s.gold.push_back(p.get<double>());
  }
  try {
    validate(s);
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
  }
  return s;
}

/// Blank lines are skipped; line numbers in errors are 1-based physical lines.
inline Corpus read_corpus(std::istream& in) {
  std::vector<Sentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(parse_sentence(line, line_no));
  }
  return Corpus(std::move(out));
}

inline Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file " + path.string());
  return read_corpus(in);
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// Writes one record per line; probabilities with 6 decimal places.
inline void write_sentence(std::ostream& out, const Sentence& s) {
  out << "{\"id\":" << nlohmann::json(s.id).dump() << ",\"words\":[";
  for (std::size_t i = 0; i < s.words.size(); ++i) {
    if (i) out << ',';
    out << nlohmann::json(s.words[i]).dump();
  }
  out << "],\"probs\":[";
  for (std::size_t i = 0; i < s.gold.size(); ++i) {
    if (i) out << ',';
    out << format_fixed(s.gold[i], 6);
  }
  out << "]}\n";
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& s : corpus) write_sentence(out, s);
}

inline void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file " + path.string());
  write_corpus(out, corpus);
  if (!out) throw IoError("write failed: " + path.string());
}

// --- folds ----------------------------------------------------------------

/// Assignment of every sentence to one of k folds.
struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> fold_of;                    // indexed by corpus position
  std::unordered_map<std::string, std::size_t> by_id;  // sentence id -> fold

  /// Corpus indices of fold f, ascending.
  std::vector<std::size_t> members(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] == f) out.push_back(i);
    }
    return out;
  }

  /// Corpus indices outside fold f, ascending.
  std::vector<std::size_t> complement(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] != f) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (auto f : fold_of) ++sizes[f];
    return sizes;
  }

  /// Stable digest of the assignment, used to check two reports share a plan.
  std::uint64_t fingerprint() const noexcept {
    std::uint64_t h = mix64(k);
    for (auto f : fold_of) h = mix64(h ^ f);
    return h;
  }
};

/// Seeded Fisher-Yates shuffle, then round-robin deal: fold sizes differ by at most one.
inline FoldPlan split_folds(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("k must be at least 2");
  if (k > corpus.size()) {
    throw ArgumentError("k=" + std::to_string(k) + " exceeds corpus size " + std::to_string(corpus.size()));
  }
  const std::size_t n = corpus.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(hash64(seed, {0x666f6c6473ULL, n}));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  FoldPlan plan;
  plan.k = k;
  plan.fold_of.assign(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos) plan.fold_of[order[pos]] = pos % k;
  for (std::size_t i = 0; i < n; ++i) plan.by_id.emplace(corpus[i].id, plan.fold_of[i]);
  return plan;
}

// --- word-type statistics -------------------------------------------------

struct WordTypeRow {
  std::string type;
  std::optional<double> mean;  // empty when no word matches
  std::size_t count = 0;
};

/// Mean gold score over word occurrences for: all words, capital-initial,
/// all-uppercase, hashtag-initial.
inline std::vector<WordTypeRow> word_type_stats(const Corpus& corpus) {
  if (corpus.empty()) throw ArgumentError("word_type_stats needs a non-empty corpus");
  std::array<double, 4> sum{};
  std::array<std::size_t, 4> count{};
  for (const auto& s : corpus) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto f = extract_features(s.words[i]);
      const std::array<bool, 4> hit{true, f.caps_initial, f.all_upper, f.hashtag};
      for (std::size_t t = 0; t < 4; ++t) {
        if (hit[t]) {
          sum[t] += s.gold[i];
          ++count[t];
        }
      }
    }
  }
  static constexpr std::array<const char*, 4> kNames{"all", "capital_initial", "uppercase", "hashtag"};
  std::vector<WordTypeRow> rows;
  for (std::size_t t = 0; t < 4; ++t) {
    WordTypeRow r{kNames[t], std::nullopt, count[t]};
    if (count[t] > 0) r.mean = sum[t] / static_cast<double>(count[t]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace emphasis
