#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "emphasis/augment.hpp"
#include "emphasis/checkpoint.hpp"
#include "emphasis/corpus.hpp"
#include "emphasis/errors.hpp"
#include "emphasis/evalx.hpp"
#include "emphasis/model.hpp"
#include "emphasis/objectives.hpp"
#include "emphasis/optimizer.hpp"
#include "emphasis/rng.hpp"
#include "emphasis/subword.hpp"

namespace emphasis {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t patience = 2;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double lambda_pair = 1.0;
  bool augment = true;
  AugmentConfig augment_config;
  bool use_features = true;
  std::uint64_t seed = 0;
  std::size_t d_e = 64;
  std::size_t d_h = 64;
  std::size_t vocab_size = 4000;
  double dropout = 0.0;

  void validate() const {
    if (epochs < 1) throw ArgumentError("epochs must be at least 1");
    if (batch_size < 1) throw ArgumentError("batch size must be at least 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ArgumentError("learning rate must be positive");
    if (!(lambda_pair >= 0.0) || !std::isfinite(lambda_pair)) throw ArgumentError("lambda_pair must be non-negative");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ArgumentError("dropout must lie in [0, 1)");
    if (d_e == 0 || d_h == 0) throw ArgumentError("model dimensions must be positive");
    augment_config.validate();
  }
};

inline nlohmann::ordered_json config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["epochs"] = c.epochs;
  j["patience"] = c.patience;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["lambda_pair"] = c.lambda_pair;
  j["augment"] = c.augment;
  j["p_remove"] = c.augment_config.p_remove;
  j["p_upper"] = c.augment_config.p_upper;
  j["p_reverse"] = c.augment_config.p_reverse;
  j["use_features"] = c.use_features;
  j["seed"] = c.seed;
  j["d_e"] = c.d_e;
  j["d_h"] = c.d_h;
  j["vocab_size"] = c.vocab_size;
  j["dropout"] = c.dropout;
  return j;
}

/// Word scores for every sentence of `corpus` under one model.
inline std::vector<std::vector<double>> predict_word_scores(const Checkpoint& ckpt, const Corpus& corpus) {
  std::vector<std::vector<double>> out;
  out.reserve(corpus.size());
  const ForwardOptions opts{ckpt.use_features, 0.0, nullptr};
  for (const auto& s : corpus) {
    out.push_back(forward(ckpt.params, encode_sentence(*ckpt.vocab, s), opts).word_scores);
  }
  return out;
}

struct TrainResult {
  Checkpoint best;
  MatchReport report;               // validation report of `best`
  std::size_t best_epoch = 0;       // 1-based
  std::size_t epochs_run = 0;
  std::vector<MatchReport> history; // validation report after each epoch
  std::vector<double> train_loss;   // mean per-sentence loss per epoch
};

namespace detail {

/// Bucketed minibatches: shuffle, stable-sort by token count, chunk, shuffle chunks.
inline std::vector<std::vector<std::size_t>> make_batches(std::span<const SubwordSequence> seqs,
                                                          std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return seqs[a].size() < seqs[b].size(); });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  for (std::size_t i = batches.size(); i > 1; --i) std::swap(batches[i - 1], batches[rng.below(i)]);
  return batches;
}

}  // namespace detail

/// Trains on `train`, evaluates on `validation` after every epoch, and keeps
/// the parameters with the best overall Match. Stops once `patience`
/// consecutive epochs fail to improve, or at the epoch cap.
inline TrainResult train_one(const Corpus& train, const Corpus& validation, const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw ArgumentError("train_one: empty training corpus");
  if (validation.empty()) throw ArgumentError("train_one: empty validation corpus");

  auto vocab = std::make_shared<const Vocab>(build_vocab(train, config.vocab_size));
  Checkpoint current{vocab, init_params(vocab->size(), config.d_e, config.d_h, hash64(config.seed, {1})),
                     config.use_features};
  ModelParams grad(current.params.dims());
  OptimizerConfig opt;
  opt.lr = config.lr;
  OptimizerState opt_state;
  Rng dropout_rng(hash64(config.seed, {4}));
  const ForwardOptions fwd{config.use_features, config.dropout, config.dropout > 0.0 ? &dropout_rng : nullptr};

  std::vector<SubwordSequence> train_seqs;
  auto encode_train = [&](const Corpus& c) {
    train_seqs.clear();
    for (const auto& s : c) train_seqs.push_back(encode_sentence(*vocab, s));
  };
  if (!config.augment) encode_train(train);

  TrainResult result;
  double best_overall = -1.0;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.augment) encode_train(augment_epoch(train, config.augment_config, hash64(config.seed, {2, epoch})));
    Rng batch_rng(hash64(config.seed, {3, epoch}));
    CompensatedSum epoch_loss;
    for (const auto& batch : detail::make_batches(train_seqs, config.batch_size, batch_rng)) {
      grad.set_zero();
      const double scale = 1.0 / static_cast<double>(batch.size());
      for (auto i : batch) {
        const auto& seq = train_seqs[i];
        const Prediction pred = forward(current.params, seq, fwd);
        const LossOutput loss = combined_loss(pred, seq.targets, config.lambda_pair);
        epoch_loss.add(loss.value);
        backward_into(grad, current.params, seq, pred, loss.grad, scale);
      }
      optimizer_step(current.params.flat(), grad.flat(), opt, opt_state);
    }
    result.train_loss.push_back(epoch_loss.value() / static_cast<double>(train_seqs.size()));

    const MatchReport report = evaluate(validation, predict_word_scores(current, validation));
    result.history.push_back(report);
    result.epochs_run = epoch;
    if (report.overall > best_overall) {
      best_overall = report.overall;
      result.best = current;
      result.report = report;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale > config.patience) {
      break;
    }
  }
  return result;
}

// --- cross-validation -----------------------------------------------------

struct CvCell {
  std::size_t fold = 0;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  MatchReport report;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

struct SummaryStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1); 0 for a single cell

  friend bool operator==(const SummaryStats&, const SummaryStats&) = default;
};

inline SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("summarize: no values");
  SummaryStats s;
  CompensatedSum sum;
  for (double v : values) sum.add(v);
  const double n = static_cast<double>(values.size());
  s.mean = sum.value() / n;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  if (values.size() > 1) {
    CompensatedSum sq;
    for (double v : values) sq.add((v - s.mean) * (v - s.mean));
    s.stddev = std::sqrt(sq.value() / (n - 1.0));
  }
  return s;
}

/// Results of the k-fold x runs protocol. Cells are ordered by (fold, run).
struct FoldReport {
  std::size_t k = 0;
  std::size_t runs = 0;
  std::uint64_t plan_fingerprint = 0;
  std::vector<CvCell> cells;
  SummaryStats summary;  // over cell overall scores
  MatchReport mean;      // per-m means over cells

  const CvCell& cell(std::size_t fold, std::size_t run) const { return cells.at(fold * runs + run); }

  /// Mean overall score of one fold across its runs.
  double fold_mean(std::size_t fold) const {
    CompensatedSum s;
    for (std::size_t r = 0; r < runs; ++r) s.add(cell(fold, r).report.overall);
    return s.value() / static_cast<double>(runs);
  }

  /// Recomputes summary and mean from the cells.
  void finalize() {
    std::vector<double> overall;
    std::array<CompensatedSum, kMaxM> per_m;
    for (const auto& c : cells) {
      overall.push_back(c.report.overall);
      for (std::size_t m = 0; m < kMaxM; ++m) per_m[m].add(c.report.match[m]);
    }
    summary = summarize(overall);
    std::array<double, kMaxM> means{};
    for (std::size_t m = 0; m < kMaxM; ++m) means[m] = per_m[m].value() / static_cast<double>(cells.size());
    mean = report_from_means(means);
  }
};

/// Seed of cell (fold, run); independent of how many runs or folds exist.
inline std::uint64_t cell_seed(std::uint64_t seed, std::size_t fold, std::size_t run) noexcept {
  return hash64(seed, {0x63656c6cULL, fold, run});
}

/// For each fold f and run r: train on every other fold, validate on f.
/// Cells run on up to `workers` threads; the report does not depend on it.
inline FoldReport run_cv(const Corpus& corpus, std::size_t k, std::size_t runs, const TrainConfig& config,
                         std::size_t workers = 1) {
  config.validate();
  if (runs < 1) throw ArgumentError("runs must be at least 1");
  const FoldPlan plan = split_folds(corpus, k, config.seed);

  std::vector<Corpus> train_sets(k), valid_sets(k);
  for (std::size_t f = 0; f < k; ++f) {
    const auto tr = plan.complement(f);
    const auto va = plan.members(f);
    train_sets[f] = corpus.subset(tr);
    valid_sets[f] = corpus.subset(va);
  }

  FoldReport report;
  report.k = k;
  report.runs = runs;
  report.plan_fingerprint = plan.fingerprint();
  report.cells.resize(k * runs);
  std::vector<std::exception_ptr> errors(k * runs);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= report.cells.size()) return;
      const std::size_t fold = i / runs;
      const std::size_t run = i % runs;
      try {
        TrainConfig cell_config = config;
        cell_config.seed = cell_seed(config.seed, fold, run);
        const TrainResult r = train_one(train_sets[fold], valid_sets[fold], cell_config);
        report.cells[i] = CvCell{fold, run, cell_config.seed, r.report, r.best_epoch, r.epochs_run};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(workers, 1, report.cells.size());
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  report.finalize();
  return report;
}

struct StrategyGain {
  double average = 0.0;
  double max = 0.0;
};

/// average = mean(variant) - mean(baseline); max = largest per-fold difference
/// of run-averaged overall scores.
inline StrategyGain strategy_gains(const FoldReport& baseline, const FoldReport& variant) {
  if (baseline.k != variant.k || baseline.runs != variant.runs ||
      baseline.plan_fingerprint != variant.plan_fingerprint) {
    throw ArgumentError("strategy_gains: reports were produced on different fold plans");
  }
  StrategyGain g;
  g.average = variant.summary.mean - baseline.summary.mean;
  g.max = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < baseline.k; ++f) g.max = std::max(g.max, variant.fold_mean(f) - baseline.fold_mean(f));
  return g;
}

/// Score-averaging ensemble: each word's score is the mean of the models'
/// aggregated word scores.
inline std::vector<std::vector<double>> ensemble_predict(std::span<const Checkpoint> models, const Corpus& corpus) {
  if (models.empty()) throw ArgumentError("ensemble_predict: no checkpoints");
  const std::uint64_t h = models.front().vocab->hash();
  for (const auto& m : models) {
    if (m.vocab->hash() != h) throw ArgumentError("ensemble_predict: checkpoints use different vocabs");
  }
  auto out = predict_word_scores(models.front(), corpus);
  if (models.size() == 1) return out;
  std::vector<std::vector<double>> delta(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) delta[i].assign(out[i].size(), 0.0);
  for (std::size_t k = 1; k < models.size(); ++k) {
    const auto scores = predict_word_scores(models[k], corpus);
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (std::size_t w = 0; w < out[i].size(); ++w) delta[i][w] += scores[i][w] - out[i][w];
    }
  }
  const double n = static_cast<double>(models.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t w = 0; w < out[i].size(); ++w) out[i][w] += delta[i][w] / n;
  }
  return out;
}

// --- report serialization -------------------------------------------------

inline void write_cells_csv(std::ostream& out, const FoldReport& r) {
  write_report_csv_header(out);
  for (const auto& c : r.cells) write_report_csv_rows(out, c.report, c.fold, c.run);
}

inline nlohmann::ordered_json fold_report_to_json(const FoldReport& r) {
  nlohmann::ordered_json j = report_to_json(r.mean);
  j["k"] = r.k;
  j["runs"] = r.runs;
  j["fold_plan"] = hex64(r.plan_fingerprint);
  j["summary"] = {{"mean", r.summary.mean}, {"min", r.summary.min}, {"max", r.summary.max},
                  {"stddev", r.summary.stddev}};
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : r.cells) {
    nlohmann::ordered_json cj = report_to_json(c.report);
    cj["fold"] = c.fold;
    cj["run"] = c.run;
    cj["seed"] = hex64(c.seed);
    cj["best_epoch"] = c.best_epoch;
    cj["epochs_run"] = c.epochs_run;
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j;
}

/// Fixed 5-decimal signed value; rounds "-0.00000" to "0.00000".
inline std::string format_gain(double v) {
  std::string s = format_fixed(v, 5);
  if (s == "-0.00000") s = "0.00000";
  return s;
}

struct NamedGain {
  std::string strategy;
  std::string baseline;  // how the baseline differs from the variant
  StrategyGain gain;
};

inline void write_gains_csv(std::ostream& out, std::span<const NamedGain> rows) {
  out << "strategy,average_gain,max_gain,baseline\n";
  for (const auto& r : rows) {
    out << r.strategy << ',' << format_gain(r.gain.average) << ',' << format_gain(r.gain.max) << ',' << r.baseline
        << '\n';
  }
}

}  // namespace emphasis
