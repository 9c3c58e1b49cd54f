#include "coin/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "coin/errors.hpp"

namespace coin {

namespace {

constexpr char kMagic[4] = {'C', 'O', 'I', 'N'};
constexpr std::uint8_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

nlohmann::ordered_json config_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(c.mode);
  j["d_emb"] = c.d_emb;
  j["d_model"] = c.d_model;
  j["d_ffn"] = c.d_ffn;
  j["blocks"] = c.n_blocks;
  j["heads"] = c.n_heads;
  j["encoder_layers"] = c.n_encoder_layers;
  j["agg_layers"] = c.n_agg_layers;
  j["len"] = c.seq_len;
  j["keep"] = c.keep_prob;
  j["context"] = c.use_context;
  j["fusion"] = to_string(c.fusion);
  j["aggregation"] = c.use_aggregation;
  j["pooling"] = to_string(c.pooling);
  j["classifier_hidden"] = c.classifier_hidden;
  j["seed"] = c.seed;
  return j;
}

ModelConfig config_from(const nlohmann::json& j) {
  ModelConfig c;
  c.mode = token_mode_from_string(j.at("mode").get<std::string>());
  c.d_emb = j.at("d_emb").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.d_ffn = j.at("d_ffn").get<std::size_t>();
  c.n_blocks = j.at("blocks").get<std::size_t>();
  c.n_heads = j.at("heads").get<std::size_t>();
  c.n_encoder_layers = j.at("encoder_layers").get<std::size_t>();
  c.n_agg_layers = j.at("agg_layers").get<std::size_t>();
  c.seq_len = j.at("len").get<std::size_t>();
  c.keep_prob = j.at("keep").get<double>();
  c.use_context = j.at("context").get<bool>();
  c.fusion = fusion_from_string(j.at("fusion").get<std::string>());
  c.use_aggregation = j.at("aggregation").get<bool>();
  c.pooling = pooling_from_string(j.at("pooling").get<std::string>());
  c.classifier_hidden = j.at("classifier_hidden").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) { return config_json(config).dump(); }

ModelConfig model_config_from_json(const std::string& text) {
  try {
    return config_from(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config parse error: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto tensors = ckpt.params.named_tensors();
  nlohmann::ordered_json header;
  header["config"] = config_json(ckpt.config);
  header["vocab_fingerprint"] = ckpt.vocab_fingerprint;
  header["vocab_size"] = ckpt.vocab_size;
  header["embedding_trainable"] = ckpt.params.embedding_trainable;
  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  for (const auto& [name, t] : tensors) {
    manifest.push_back({{"name", name}, {"shape", t->shape}});
  }
  header["tensors"] = std::move(manifest);
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint to " + path);
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));
  const std::uint32_t len = static_cast<std::uint32_t>(head.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto& [name, t] : tensors) {
    for (real v : t->data) {
      const double d = static_cast<double>(v);
      out.write(reinterpret_cast<const char*>(&d), 8);
    }
  }
  if (!out) throw ConfigError("failed while writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw ArtifactError(path + " is not a COIN checkpoint");
  }
  const int version = in.get();
  if (version != kVersion) {
    throw ArtifactError("unsupported checkpoint version " + std::to_string(version));
  }
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  std::string head(len, '\0');
  in.read(head.data(), len);
  if (!in) throw ArtifactError("truncated checkpoint header in " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(head);
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("bad checkpoint header: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.config = config_from(header.at("config"));
  ckpt.vocab_fingerprint = header.at("vocab_fingerprint").get<std::string>();
  ckpt.vocab_size = header.at("vocab_size").get<std::size_t>();
  const bool emb_trainable = header.at("embedding_trainable").get<bool>();

  // Rebuild the parameter skeleton, then overwrite every tensor from the blob.
  EmbeddingTable emb;
  emb.dim = ckpt.config.d_emb;
  emb.trainable = emb_trainable;
  emb.table = zeros({ckpt.vocab_size, ckpt.config.d_emb}, emb_trainable);
  Rng rng(0);
  ckpt.params = init_params(ckpt.config, emb, rng);

  const auto tensors = ckpt.params.named_tensors();
  const auto& manifest = header.at("tensors");
  if (manifest.size() != tensors.size()) {
    throw ArtifactError("checkpoint tensor manifest does not match this configuration");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& [name, t] = tensors[i];
    if (manifest[i].at("name").get<std::string>() != name ||
        manifest[i].at("shape").get<Shape>() != t->shape) {
      throw ArtifactError("checkpoint tensor mismatch at " + name);
    }
    for (real& v : t->data) {
      double d = 0;
      in.read(reinterpret_cast<char*>(&d), 8);
      v = static_cast<real>(d);
    }
  }
  if (!in) throw ArtifactError("truncated checkpoint blob in " + path);
  return ckpt;
}

}  // namespace coin
