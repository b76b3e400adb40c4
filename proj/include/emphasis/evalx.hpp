#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "emphasis/corpus.hpp"
#include "emphasis/errors.hpp"

namespace emphasis {

inline constexpr std::size_t kMaxM = 4;

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) comp_ += (sum_ - t) + x;
    else comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Indices of the min(m, n) highest scores, returned ascending. Ties go to
/// the smaller index.
inline std::vector<std::size_t> top_m(std::span<const double> scores, std::size_t m) {
  if (m < 1) throw ArgumentError("top_m: m must be at least 1");
  if (scores.empty()) throw ArgumentError("top_m: empty score vector");
  for (double s : scores) {
    if (std::isnan(s)) throw ArgumentError("top_m: NaN score");
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t k = std::min(m, scores.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// |top_m(gold) ∩ top_m(predicted)| / min(m, n).
inline double match_m(std::span<const double> gold, std::span<const double> predicted, std::size_t m) {
  if (gold.size() != predicted.size()) {
    throw ArgumentError("match_m: " + std::to_string(gold.size()) + " gold scores but " +
                        std::to_string(predicted.size()) + " predictions");
  }
  const auto g = top_m(gold, m);
  const auto p = top_m(predicted, m);
  std::vector<std::size_t> common;
  std::set_intersection(g.begin(), g.end(), p.begin(), p.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(g.size());
}

/// Corpus means of match_m for m = 1..4 and their average.
struct MatchReport {
  std::array<double, kMaxM> match{};  // match[m - 1]
  double overall = 0.0;

  double at(std::size_t m) const { return match.at(m - 1); }

  friend bool operator==(const MatchReport&, const MatchReport&) = default;
};

inline MatchReport report_from_means(const std::array<double, kMaxM>& match) {
  MatchReport r;
  r.match = match;
  CompensatedSum total;
  for (double v : match) total.add(v);
  r.overall = total.value() / static_cast<double>(kMaxM);
  return r;
}

/// predictions[i] are the word scores for corpus[i].
inline MatchReport evaluate(const Corpus& corpus, std::span<const std::vector<double>> predictions) {
  if (predictions.size() != corpus.size()) {
    throw ArgumentError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(corpus.size()) + " sentences");
  }
  if (corpus.empty()) throw ArgumentError("evaluate: empty corpus");
  std::array<CompensatedSum, kMaxM> sums;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (std::size_t m = 1; m <= kMaxM; ++m) sums[m - 1].add(match_m(corpus[i].gold, predictions[i], m));
  }
  std::array<double, kMaxM> means{};
  for (std::size_t m = 0; m < kMaxM; ++m) means[m] = sums[m].value() / static_cast<double>(corpus.size());
  return report_from_means(means);
}

/// Predictions keyed by sentence id; every corpus sentence must be present.
inline MatchReport evaluate(const Corpus& corpus,
                            const std::unordered_map<std::string, std::vector<double>>& predictions) {
  std::vector<std::vector<double>> aligned;
  aligned.reserve(corpus.size());
  for (const auto& s : corpus) {
    auto it = predictions.find(s.id);
    if (it == predictions.end()) throw ArgumentError("evaluate: no prediction for sentence '" + s.id + "'");
    aligned.push_back(it->second);
  }
  return evaluate(corpus, aligned);
}

// --- report serialization -------------------------------------------------

inline void write_report_csv_header(std::ostream& out) { out << "fold,run,m,score\n"; }

inline void write_report_csv_rows(std::ostream& out, const MatchReport& r, std::size_t fold, std::size_t run) {
  for (std::size_t m = 1; m <= kMaxM; ++m) {
    out << fold << ',' << run << ',' << m << ',' << format_fixed(r.at(m), 6) << '\n';
  }
}

inline nlohmann::ordered_json report_to_json(const MatchReport& r) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json mm;
  for (std::size_t m = 1; m <= kMaxM; ++m) mm[std::to_string(m)] = r.at(m);
  j["match_m"] = mm;
  j["overall"] = r.overall;
  return j;
}

inline MatchReport report_from_json(const nlohmann::json& j) {
  std::array<double, kMaxM> match{};
  for (std::size_t m = 1; m <= kMaxM; ++m) match[m - 1] = j.at("match_m").at(std::to_string(m)).get<double>();
  MatchReport r;
  r.match = match;
  r.overall = j.at("overall").get<double>();
  return r;
}

}  // namespace emphasis
