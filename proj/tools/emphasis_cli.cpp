// Command-line front end: train, cv, predict, eval, stats, augment-preview.
//
// Exit codes: 0 success, 1 invalid input or arguments, 2 I/O failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emphasis/emphasis.hpp"

namespace fs = std::filesystem;
using namespace emphasis;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

void add_train_flags(CLI::App* cmd, TrainConfig& cfg, bool& no_augment, bool& no_features) {
  cmd->add_option("--epochs", cfg.epochs, "maximum epochs")->capture_default_str();
  cmd->add_option("--patience", cfg.patience, "epochs without validation improvement before stopping")
      ->capture_default_str();
  cmd->add_option("--batch-size", cfg.batch_size)->capture_default_str();
  cmd->add_option("--lr", cfg.lr, "adam learning rate")->capture_default_str();
  cmd->add_option("--lambda-pair", cfg.lambda_pair, "weight of the pairwise ranking loss")->capture_default_str();
  cmd->add_option("--p-remove", cfg.augment_config.p_remove)->capture_default_str();
  cmd->add_option("--p-upper", cfg.augment_config.p_upper)->capture_default_str();
  cmd->add_option("--p-reverse", cfg.augment_config.p_reverse)->capture_default_str();
  cmd->add_flag("--no-augment", no_augment, "disable training-time augmentation");
  cmd->add_flag("--no-features", no_features, "disable lexical features");
  cmd->add_option("--d-e", cfg.d_e, "embedding width")->capture_default_str();
  cmd->add_option("--d-h", cfg.d_h, "recurrent state width per direction")->capture_default_str();
  cmd->add_option("--vocab-size", cfg.vocab_size)->capture_default_str();
  cmd->add_option("--dropout", cfg.dropout)->capture_default_str();
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

std::string cells_csv(const FoldReport& r) {
  std::ostringstream os;
  write_cells_csv(os, r);
  return os.str();
}

void write_cv(const fs::path& dir, const FoldReport& r, const TrainConfig& cfg, const std::string& label) {
  nlohmann::ordered_json j;
  j["label"] = label;
  j["config"] = config_to_json(cfg);
  const auto report = fold_report_to_json(r);
  for (const auto& [k, v] : report.items()) j[k] = v;
  write_text(dir / "cells.csv", cells_csv(r));
  write_text(dir / "summary.json", dump(j));
}

struct Strategy {
  std::string name;
  std::string baseline;
};

std::optional<Strategy> strategy_for(const std::string& name) {
  if (name == "features") return Strategy{"lexical_features", "same config with --no-features"};
  if (name == "pairwise") return Strategy{"pairwise_loss", "same config with --lambda-pair 0"};
  if (name == "augment") return Strategy{"data_augmentation", "same config with --no-augment"};
  return std::nullopt;
}

TrainConfig baseline_config(const std::string& name, TrainConfig cfg) {
  if (name == "features") {
    if (!cfg.use_features) throw ArgumentError("--compare features needs features enabled in the variant");
    cfg.use_features = false;
  } else if (name == "pairwise") {
    if (cfg.lambda_pair == 0.0) throw ArgumentError("--compare pairwise needs a positive --lambda-pair");
    cfg.lambda_pair = 0.0;
  } else {
    if (!cfg.augment) throw ArgumentError("--compare augment needs augmentation enabled in the variant");
    cfg.augment = false;
  }
  return cfg;
}

std::unordered_map<std::string, std::vector<double>> read_predictions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open predictions " + path.string());
  std::unordered_map<std::string, std::vector<double>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto id = j.at("id").get<std::string>();
      auto scores = j.at("scores").get<std::vector<double>>();
      if (!out.emplace(std::move(id), std::move(scores)).second) throw ParseError(line_no, "duplicate id");
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emphasis selection: subword regression with pairwise ranking loss"};
  app.require_subcommand(1);

  TrainConfig cfg;
  bool no_augment = false;
  bool no_features = false;
  std::size_t workers = 1;

  // train
  auto* train = app.add_subcommand("train", "train on one split and keep the best validation checkpoint");
  fs::path train_path, valid_path, out_dir;
  train->add_option("--train", train_path, "training JSON-lines file")->required();
  train->add_option("--valid", valid_path, "validation JSON-lines file")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--seed", cfg.seed)->capture_default_str();
  add_train_flags(train, cfg, no_augment, no_features);

  // cv
  auto* cv = app.add_subcommand("cv", "k-fold x runs cross-validation");
  fs::path data_path;
  std::size_t k = 8, runs = 5;
  std::vector<std::string> compare;
  cv->add_option("--data", data_path, "JSON-lines corpus")->required();
  cv->add_option("--k", k, "number of folds")->capture_default_str();
  cv->add_option("--runs", runs, "runs per fold")->capture_default_str();
  cv->add_option("--seed", cfg.seed)->required();
  cv->add_option("--out", out_dir, "output directory")->required();
  cv->add_option("--workers", workers, "concurrent cells")->capture_default_str();
  cv->add_option("--compare", compare, "strategies to ablate: features, pairwise, augment")
      ->check(CLI::IsMember({"features", "pairwise", "augment"}));
  add_train_flags(cv, cfg, no_augment, no_features);

  // predict
  auto* predict = app.add_subcommand("predict", "score words with one checkpoint or a mean-score ensemble");
  std::vector<fs::path> ckpt_paths;
  fs::path vocab_path, input_path, output_path;
  predict->add_option("--checkpoint", ckpt_paths, "checkpoint file (repeatable)")->required();
  predict->add_option("--vocab", vocab_path, "vocab file the checkpoints were trained with")->required();
  predict->add_option("--input", input_path, "JSON-lines corpus")->required();
  predict->add_option("--output", output_path, "output JSON-lines (default stdout)");

  // eval
  auto* eval = app.add_subcommand("eval", "Match_m report of predictions against gold");
  fs::path gold_path, pred_path, csv_path;
  eval->add_option("--gold", gold_path, "gold JSON-lines corpus")->required();
  eval->add_option("--pred", pred_path, "predictions JSON-lines (id, scores)")->required();
  eval->add_option("--output", output_path, "JSON report (default stdout)");
  eval->add_option("--csv", csv_path, "also write fold,run,m,score CSV");

  // stats
  auto* stats = app.add_subcommand("stats", "average gold score per word type");
  stats->add_option("--data", data_path, "JSON-lines corpus")->required();
  stats->add_option("--output", output_path, "CSV output (default stdout)");

  // augment-preview
  auto* preview = app.add_subcommand("augment-preview", "print augmented variants of one sentence");
  std::string sentence_id;
  std::size_t n_variants = 5;
  preview->add_option("--data", data_path, "JSON-lines corpus")->required();
  preview->add_option("--id", sentence_id, "sentence id (default: first sentence)");
  preview->add_option("--n", n_variants, "number of variants")->capture_default_str();
  preview->add_option("--seed", cfg.seed)->capture_default_str();
  preview->add_option("--p-remove", cfg.augment_config.p_remove)->capture_default_str();
  preview->add_option("--p-upper", cfg.augment_config.p_upper)->capture_default_str();
  preview->add_option("--p-reverse", cfg.augment_config.p_reverse)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }
  cfg.augment = !no_augment;
  cfg.use_features = !no_features;

  try {
    if (*train) {
      const Corpus train_corpus = load_corpus(train_path);
      const Corpus valid_corpus = load_corpus(valid_path);
      const TrainResult r = train_one(train_corpus, valid_corpus, cfg);
      fs::create_directories(out_dir);
      save_vocab(out_dir / "vocab.txt", *r.best.vocab);
      save_checkpoint(out_dir / "model.json", r.best);
      nlohmann::ordered_json j = report_to_json(r.report);
      j["best_epoch"] = r.best_epoch;
      j["epochs_run"] = r.epochs_run;
      nlohmann::ordered_json hist = nlohmann::ordered_json::array();
      for (std::size_t e = 0; e < r.history.size(); ++e) {
        auto h = report_to_json(r.history[e]);
        h["epoch"] = e + 1;
        h["train_loss"] = r.train_loss[e];
        hist.push_back(std::move(h));
      }
      j["history"] = std::move(hist);
      j["config"] = config_to_json(cfg);
      write_text(out_dir / "report.json", dump(j));
      std::ostringstream csv;
      write_report_csv_header(csv);
      write_report_csv_rows(csv, r.report, 0, 0);
      write_text(out_dir / "report.csv", csv.str());
      std::cout << "best epoch " << r.best_epoch << ", overall " << format_fixed(r.report.overall, 4) << '\n';
    } else if (*cv) {
      const Corpus corpus = load_corpus(data_path);
      const FoldReport variant = run_cv(corpus, k, runs, cfg, workers);
      write_cv(out_dir, variant, cfg, "variant");
      std::cout << "overall mean " << format_fixed(variant.summary.mean, 4) << " (min "
                << format_fixed(variant.summary.min, 4) << ", max " << format_fixed(variant.summary.max, 4) << ")\n";
      if (!compare.empty()) {
        std::vector<NamedGain> gains;
        for (const auto& name : compare) {
          const auto strategy = *strategy_for(name);
          const TrainConfig base_cfg = baseline_config(name, cfg);
          const FoldReport baseline = run_cv(corpus, k, runs, base_cfg, workers);
          write_cv(out_dir / ("baseline_" + name), baseline, base_cfg, strategy.baseline);
          gains.push_back({strategy.name, strategy.baseline, strategy_gains(baseline, variant)});
        }
        std::ostringstream csv;
        write_gains_csv(csv, gains);
        write_text(out_dir / "gains.csv", csv.str());
        std::cout << csv.str();
      }
    } else if (*predict) {
      auto vocab = std::make_shared<const Vocab>(load_vocab(vocab_path));
      std::vector<Checkpoint> models;
      for (const auto& p : ckpt_paths) models.push_back(load_checkpoint(p, vocab));
      const Corpus corpus = load_corpus(input_path);
      const auto scores = ensemble_predict(models, corpus);
      std::ostringstream os;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        nlohmann::ordered_json j;
        j["id"] = corpus[i].id;
        j["words"] = corpus[i].words;
        j["scores"] = scores[i];
        j["top4"] = top_m(scores[i], 4);
        j["method"] = models.size() == 1 ? "single" : "mean-score";
        os << j.dump() << '\n';
      }
      if (output_path.empty()) std::cout << os.str();
      else write_text(output_path, os.str());
    } else if (*eval) {
      const Corpus gold = load_corpus(gold_path);
      const MatchReport r = evaluate(gold, read_predictions(pred_path));
      if (output_path.empty()) std::cout << dump(report_to_json(r));
      else write_text(output_path, dump(report_to_json(r)));
      if (!csv_path.empty()) {
        std::ostringstream csv;
        write_report_csv_header(csv);
        write_report_csv_rows(csv, r, 0, 0);
        write_text(csv_path, csv.str());
      }
    } else if (*stats) {
      const Corpus corpus = load_corpus(data_path);
      std::ostringstream os;
      os << "word_type,avg_score,count\n";
      for (const auto& row : word_type_stats(corpus)) {
        os << row.type << ',' << (row.mean ? format_fixed(*row.mean, 3) : std::string("NA")) << ',' << row.count
           << '\n';
      }
      if (output_path.empty()) std::cout << os.str();
      else write_text(output_path, os.str());
    } else if (*preview) {
      const Corpus corpus = load_corpus(data_path);
      if (corpus.empty()) throw ArgumentError("corpus is empty");
      std::size_t index = 0;
      if (!sentence_id.empty()) {
        index = corpus.size();
        for (std::size_t i = 0; i < corpus.size(); ++i) {
          if (corpus[i].id == sentence_id) index = i;
        }
        if (index == corpus.size()) throw ArgumentError("no sentence with id '" + sentence_id + "'");
      }
      for (std::size_t v = 0; v < n_variants; ++v) {
        Rng rng(hash64(cfg.seed, {0x70726576ULL, index, v}));
        write_sentence(std::cout, augment_sentence(corpus[index], cfg.augment_config, rng));
      }
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
