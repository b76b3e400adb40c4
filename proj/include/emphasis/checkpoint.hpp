#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "emphasis/errors.hpp"
#include "emphasis/model.hpp"
#include "emphasis/subword.hpp"

namespace emphasis {

inline constexpr const char* kCheckpointFormat = "emphasis-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// Trained parameters bound to the vocab they were trained with.
struct Checkpoint {
  std::shared_ptr<const Vocab> vocab;
  ModelParams params;
  bool use_features = true;
};

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::ordered_json checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& dims = ckpt.params.dims();
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["dims"] = {{"vocab_size", dims.vocab_size}, {"d_e", dims.d_e}, {"d_h", dims.d_h}};
  j["vocab_hash"] = hex64(ckpt.vocab->hash());
  j["use_features"] = ckpt.use_features;
  nlohmann::ordered_json blocks = nlohmann::ordered_json::object();
  const auto flat = ckpt.params.flat();
  for (const auto& b : ckpt.params.blocks()) {
    blocks[b.name] = std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                         flat.begin() + static_cast<std::ptrdiff_t>(b.offset + b.size));
  }
  j["params"] = std::move(blocks);
  return j;
}

/// Rejects a checkpoint whose vocab hash or size disagrees with `vocab`.
inline Checkpoint checkpoint_from_json(const nlohmann::json& j, std::shared_ptr<const Vocab> vocab) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw ValidationError("not an emphasis checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ValidationError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    }
    if (j.at("vocab_hash").get<std::string>() != hex64(vocab->hash())) {
      throw ValidationError("checkpoint vocab hash " + j.at("vocab_hash").get<std::string>() +
                            " does not match supplied vocab " + hex64(vocab->hash()));
    }
    ModelDims dims{j.at("dims").at("vocab_size").get<std::size_t>(), j.at("dims").at("d_e").get<std::size_t>(),
                   j.at("dims").at("d_h").get<std::size_t>()};
    if (dims.vocab_size != vocab->size()) throw ValidationError("checkpoint vocab size mismatch");
    if (dims.d_e == 0 || dims.d_h == 0) throw ValidationError("checkpoint has a zero dimension");
    Checkpoint ckpt{std::move(vocab), ModelParams(dims), j.at("use_features").get<bool>()};
    auto flat = ckpt.params.flat();
    for (const auto& b : ckpt.params.blocks()) {
      const auto& arr = j.at("params").at(b.name);
      if (!arr.is_array() || arr.size() != b.size) throw ValidationError("checkpoint block '" + b.name + "' has wrong size");
      for (std::size_t i = 0; i < b.size; ++i) flat[b.offset + i] = arr[i].get<double>();
    }
    if (!ckpt.params.all_finite()) throw ValidationError("checkpoint contains non-finite parameters");
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt).dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, std::shared_ptr<const Vocab> vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j, std::move(vocab));
}

}  // namespace emphasis
