#pragma once

#include <cstdint>
#include <string>

#include "coin/model.hpp"

namespace coin {

/// Model snapshot bound to the vocabulary it was trained with.
struct Checkpoint {
  ModelConfig config;
  std::string vocab_fingerprint;
  std::size_t vocab_size = 0;
  ModelParams params;
};

/// File layout: "COIN" magic, one version byte, little-endian uint32
/// header length, UTF-8 JSON header (config, vocab fingerprint/size,
/// tensor manifest), then every tensor from ModelParams::named_tensors()
/// as raw little-endian float64 in manifest order.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace coin
