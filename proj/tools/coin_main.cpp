// coin: train/evaluate/inspect the context-aware interaction network for
// sentence-pair matching described in README.md.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coin/checkpoint.hpp"
#include "coin/data.hpp"
#include "coin/errors.hpp"
#include "coin/model.hpp"
#include "coin/tensor.hpp"
#include "coin/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct RunConfig {
  std::string mode = "word";
  std::size_t d_emb = 0;  // 0 = auto: 300 word / 200 char
  std::size_t d_model = 150;
  std::size_t d_ffn = 300;
  std::size_t blocks = 3;
  std::size_t heads = 5;
  std::size_t len = 32;
  double keep = 0.8;
  bool context = true;
  std::string fusion = "gate";
  bool aggregation = true;
  std::string pooling = "multihead";
  std::size_t classifier_hidden = 300;
  std::uint64_t seed = 12345;

  double lr = 0.001;
  double decay = 0.95;
  double clip = 5.0;
  double l2 = 1e-5;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::size_t min_count = 1;

  std::string train_path;
  std::string dev_path;
  std::string embeddings_path;
  std::string out_dir = "coin_out";

  void resolve() {
    if (d_emb == 0) d_emb = mode == "char" ? 200 : 300;
  }

  coin::ModelConfig model_config() const {
    coin::ModelConfig c;
    c.mode = coin::token_mode_from_string(mode);
    c.d_emb = d_emb;
    c.d_model = d_model;
    c.d_ffn = d_ffn;
    c.n_blocks = blocks;
    c.n_heads = heads;
    c.seq_len = len;
    c.keep_prob = keep;
    c.use_context = context;
    c.fusion = coin::fusion_from_string(fusion);
    c.use_aggregation = aggregation;
    c.pooling = coin::pooling_from_string(pooling);
    c.classifier_hidden = classifier_hidden;
    c.seed = seed;
    return c;
  }

  coin::TrainSettings train_settings() const {
    coin::TrainSettings s;
    s.epochs = epochs;
    s.batch_size = batch_size;
    s.seed = seed;
    s.lr = lr;
    s.decay = decay;
    s.clip = clip;
    s.l2 = l2;
    return s;
  }

  ordered_json to_json() const {
    ordered_json j;
    j["mode"] = mode;
    j["d_emb"] = d_emb;
    j["d_model"] = d_model;
    j["d_ffn"] = d_ffn;
    j["blocks"] = blocks;
    j["heads"] = heads;
    j["len"] = len;
    j["keep"] = keep;
    j["context"] = context;
    j["fusion"] = fusion;
    j["aggregation"] = aggregation;
    j["pooling"] = pooling;
    j["classifier_hidden"] = classifier_hidden;
    j["seed"] = seed;
    j["lr"] = lr;
    j["decay"] = decay;
    j["clip"] = clip;
    j["l2"] = l2;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["min_count"] = min_count;
    j["train"] = train_path;
    j["dev"] = dev_path;
    j["embeddings"] = embeddings_path;
    j["out"] = out_dir;
    return j;
  }
};

void apply_config_file(RunConfig& rc, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw coin::ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw coin::ConfigError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw coin::ConfigError("config file must hold a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    try {
      if (k == "mode") rc.mode = it->get<std::string>();
      else if (k == "d_emb") rc.d_emb = it->get<std::size_t>();
      else if (k == "d_model") rc.d_model = it->get<std::size_t>();
      else if (k == "d_ffn") rc.d_ffn = it->get<std::size_t>();
      else if (k == "blocks") rc.blocks = it->get<std::size_t>();
      else if (k == "heads") rc.heads = it->get<std::size_t>();
      else if (k == "len") rc.len = it->get<std::size_t>();
      else if (k == "keep") rc.keep = it->get<double>();
      else if (k == "context") rc.context = it->get<bool>();
      else if (k == "fusion") rc.fusion = it->get<std::string>();
      else if (k == "aggregation") rc.aggregation = it->get<bool>();
      else if (k == "pooling") rc.pooling = it->get<std::string>();
      else if (k == "classifier_hidden") rc.classifier_hidden = it->get<std::size_t>();
      else if (k == "seed") rc.seed = it->get<std::uint64_t>();
      else if (k == "lr") rc.lr = it->get<double>();
      else if (k == "decay") rc.decay = it->get<double>();
      else if (k == "clip") rc.clip = it->get<double>();
      else if (k == "l2") rc.l2 = it->get<double>();
      else if (k == "epochs") rc.epochs = it->get<std::size_t>();
      else if (k == "batch_size") rc.batch_size = it->get<std::size_t>();
      else if (k == "min_count") rc.min_count = it->get<std::size_t>();
      else if (k == "train") rc.train_path = it->get<std::string>();
      else if (k == "dev") rc.dev_path = it->get<std::string>();
      else if (k == "embeddings") rc.embeddings_path = it->get<std::string>();
      else if (k == "out") rc.out_dir = it->get<std::string>();
      else throw coin::ConfigError("config file " + path + ": unknown key \"" + k + "\"");
    } catch (const nlohmann::json::exception& e) {
      throw coin::ConfigError("config file " + path + ", key \"" + k + "\": " + e.what());
    }
  }
}

std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc - 1; ++i) {
    if (std::string(argv[i]) == "--config") return argv[i + 1];
  }
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return "";
}

void apply_env_seed(RunConfig& rc) {
  if (const char* env = std::getenv("COIN_SEED")) {
    try {
      rc.seed = std::stoull(env);
    } catch (...) {
      throw coin::ConfigError(std::string("COIN_SEED is not an integer: ") + env);
    }
  }
}

void add_model_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--config", "JSON config file; flags override its keys")
      ->check(CLI::ExistingFile);
  cmd->add_option("--mode", rc.mode, "Tokenization: word or char")->capture_default_str();
  cmd->add_option("--d_emb", rc.d_emb, "Embedding width (0 = 300 word / 200 char)")
      ->capture_default_str();
  cmd->add_option("--d_model", rc.d_model, "Hidden width")->capture_default_str();
  cmd->add_option("--d_ffn", rc.d_ffn, "Attention feed-forward width")->capture_default_str();
  cmd->add_option("--blocks", rc.blocks, "Interaction block count")->capture_default_str();
  cmd->add_option("--heads", rc.heads, "Pooling heads (must divide d_model)")
      ->capture_default_str();
  cmd->add_option("--len", rc.len, "Hard sentence-length cutoff")->capture_default_str();
  cmd->add_option("--keep", rc.keep, "Dropout retention probability")->capture_default_str();
  cmd->add_flag("--context,!--no-context", rc.context, "Context-aware cross-attention")
      ->capture_default_str();
  cmd->add_option("--fusion", rc.fusion, "Fusion layer: gate or simple")->capture_default_str();
  cmd->add_flag("--aggregation,!--no-aggregation", rc.aggregation, "Convolutional aggregation")
      ->capture_default_str();
  cmd->add_option("--pooling", rc.pooling, "Pooling: multihead or max")->capture_default_str();
  cmd->add_option("--classifier_hidden", rc.classifier_hidden, "Classifier hidden width")
      ->capture_default_str();
  cmd->add_option("--seed", rc.seed, "Global seed (env COIN_SEED is the fallback)")
      ->capture_default_str();
}

void add_train_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--lr", rc.lr, "Initial Adam learning rate")->capture_default_str();
  cmd->add_option("--decay", rc.decay, "Per-epoch exponential lr decay factor")
      ->capture_default_str();
  cmd->add_option("--clip", rc.clip, "Global-norm gradient clipping threshold")
      ->capture_default_str();
  cmd->add_option("--l2", rc.l2, "L2 regularization coefficient")->capture_default_str();
  cmd->add_option("--epochs", rc.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--batch_size", rc.batch_size, "Batch size")->capture_default_str();
  cmd->add_option("--min_count", rc.min_count, "Vocabulary frequency threshold")
      ->capture_default_str();
  cmd->add_option("--train", rc.train_path, "Training TSV");
  cmd->add_option("--dev", rc.dev_path, "Dev TSV for model selection");
  cmd->add_option("--embeddings", rc.embeddings_path, "Pretrained embedding text file (word mode)");
  cmd->add_option("--out", rc.out_dir, "Output directory")->capture_default_str();
}

std::string json_line(const ordered_json& j) { return j.dump() + "\n"; }

int cmd_train(RunConfig rc) {
  rc.resolve();
  if (rc.train_path.empty()) throw coin::ConfigError("train: --train path is required");
  if (rc.dev_path.empty()) throw coin::ConfigError("train: --dev path is required");
  const auto config = rc.model_config();
  config.validate();

  const auto mode = config.mode;
  auto train_set = coin::load_pairs_tsv(rc.train_path, mode);
  auto dev_set = coin::load_pairs_tsv(rc.dev_path, mode);
  if (train_set.empty()) throw coin::ConfigError("train: " + rc.train_path + " holds no pairs");
  if (dev_set.empty()) throw coin::ConfigError("train: " + rc.dev_path + " holds no pairs");

  auto vocab = coin::build_vocab(train_set, rc.min_count);
  coin::EmbeddingTable emb;
  if (!rc.embeddings_path.empty()) {
    if (mode != coin::TokenMode::kWord) {
      throw coin::ConfigError("pretrained embeddings are only supported in word mode");
    }
    emb = coin::load_pretrained_embeddings(rc.embeddings_path, vocab, config.d_emb, config.seed);
  } else {
    emb = coin::random_embeddings(vocab, config.d_emb, config.seed);
  }

  fs::create_directories(rc.out_dir);
  const std::string report_path = (fs::path(rc.out_dir) / "report.jsonl").string();
  std::ofstream report(report_path, std::ios::binary);
  if (!report) throw coin::ConfigError("cannot write " + report_path);
  report << json_line({{"config", rc.to_json()}});

  auto result = coin::train(config, rc.train_settings(), train_set, dev_set, vocab, emb,
                            [&report](const coin::EpochStats& row) {
                              ordered_json j;
                              j["epoch"] = row.epoch;
                              j["lr"] = row.lr;
                              j["train_loss"] = row.train_loss;
                              j["dev_accuracy"] = row.dev.accuracy;
                              j["dev_precision"] = row.dev.precision;
                              j["dev_recall"] = row.dev.recall;
                              j["dev_f1"] = row.dev.f1;
                              j["dev_n"] = row.dev.n;
                              report << json_line(j);
                              report.flush();
                              std::printf(
                                  "epoch %zu  loss %.6f  lr %.6g  dev acc %.4f  dev f1 %.4f\n",
                                  row.epoch, row.train_loss, row.lr, row.dev.accuracy, row.dev.f1);
                            });
  report << json_line({{"best_epoch", result.report.best_epoch}});
  report.close();

  vocab.save((fs::path(rc.out_dir) / "vocab.json").string());

  coin::Checkpoint ckpt;
  ckpt.config = config;
  ckpt.vocab_fingerprint = vocab.fingerprint();
  ckpt.vocab_size = vocab.size();
  ckpt.params = result.params;
  coin::save_checkpoint((fs::path(rc.out_dir) / "checkpoint.bin").string(), ckpt);

  std::printf("best epoch %zu; wall %.1fs; wrote %s\n", result.report.best_epoch,
              result.report.wall_seconds, rc.out_dir.c_str());
  return 0;
}

coin::Checkpoint load_checked(const std::string& ckpt_path, const std::string& vocab_path,
                              coin::Vocabulary& vocab_out) {
  auto ckpt = coin::load_checkpoint(ckpt_path);
  vocab_out = coin::Vocabulary::load(vocab_path);
  if (vocab_out.fingerprint() != ckpt.vocab_fingerprint) {
    throw coin::ArtifactError("vocabulary " + vocab_path + " does not match checkpoint " +
                              ckpt_path + " (fingerprint mismatch)");
  }
  if (vocab_out.size() != ckpt.vocab_size) {
    throw coin::ArtifactError("vocabulary size mismatch against checkpoint");
  }
  return ckpt;
}

std::string default_vocab_path(const std::string& ckpt_path) {
  return (fs::path(ckpt_path).parent_path() / "vocab.json").string();
}

int cmd_eval(const std::string& ckpt_path, std::string vocab_path, const std::string& data_path,
             const std::string& out_path, std::size_t batch_size) {
  if (vocab_path.empty()) vocab_path = default_vocab_path(ckpt_path);
  coin::Vocabulary vocab;
  auto ckpt = load_checked(ckpt_path, vocab_path, vocab);
  auto dataset = coin::load_pairs_tsv(data_path, ckpt.config.mode);
  if (dataset.empty()) throw coin::ConfigError("eval: " + data_path + " holds no pairs");

  auto metrics = coin::evaluate_metrics(ckpt.params, dataset, vocab, ckpt.config, batch_size);
  ordered_json j;
  j["accuracy"] = metrics.accuracy;
  j["precision"] = metrics.precision;
  j["recall"] = metrics.recall;
  j["f1"] = metrics.f1;
  j["n"] = metrics.n;
  j["config"] = nlohmann::json::parse(coin::model_config_to_json(ckpt.config));

  std::printf("accuracy %.6f  precision %.6f  recall %.6f  f1 %.6f  (n=%zu)\n", metrics.accuracy,
              metrics.precision, metrics.recall, metrics.f1, metrics.n);
  std::cout << j.dump() << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw coin::ConfigError("cannot write " + out_path);
    out << j.dump() << "\n";
  }
  return 0;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

int cmd_predict(const std::string& ckpt_path, const std::string& ensemble_list,
                std::string vocab_path, const std::string& sentence_a,
                const std::string& sentence_b) {
  std::vector<std::string> paths;
  if (!ensemble_list.empty()) {
    paths = split_commas(ensemble_list);
  } else if (!ckpt_path.empty()) {
    paths.push_back(ckpt_path);
  } else {
    throw coin::ConfigError("predict: provide --checkpoint or --ensemble");
  }
  if (vocab_path.empty()) vocab_path = default_vocab_path(paths[0]);

  std::vector<coin::Checkpoint> ckpts;
  coin::Vocabulary vocab;
  for (const auto& p : paths) ckpts.push_back(load_checked(p, vocab_path, vocab));

  const auto mode = ckpts[0].config.mode;
  coin::PairExample ex;
  ex.a = coin::tokenize(sentence_a, mode);
  ex.b = coin::tokenize(sentence_b, mode);
  ex.label = 0;
  auto batch = coin::make_batch({ex}, vocab, ckpts[0].config.seq_len);

  int label;
  double p_dup;
  if (ckpts.size() == 1) {
    p_dup = coin::predict_duplicate_probs(ckpts[0].params, batch, ckpts[0].config)[0];
    label = p_dup > 0.5 ? 1 : 0;
  } else {
    std::vector<coin::EnsembleMember> members;
    members.reserve(ckpts.size());
    for (const auto& c : ckpts) members.push_back({&c.params, &c.config});
    label = coin::ensemble_vote(members, batch)[0];
    double sum = 0;
    for (const auto& c : ckpts) sum += coin::predict_duplicate_probs(c.params, batch, c.config)[0];
    p_dup = sum / ckpts.size();
  }
  std::printf("%s p_duplicate=%.6f p_non_duplicate=%.6f\n",
              label == 1 ? "DUPLICATE" : "NON-DUPLICATE", p_dup, 1.0 - p_dup);
  return 0;
}

void write_block_csv(const std::string& path, const coin::TraceMatrix& m,
                     const std::vector<std::string>& tokens_a,
                     const std::vector<std::string>& tokens_b) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw coin::ConfigError("cannot write " + path);
  out << "token";
  for (const auto& t : tokens_b) out << "," << t;
  out << "\n";
  char buf[32];
  for (std::size_t i = 0; i < m.rows; ++i) {
    out << tokens_a[i];
    for (std::size_t j = 0; j < m.cols; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.at(i, j));
      out << "," << buf;
    }
    out << "\n";
  }
}

nlohmann::json matrix_json(const coin::TraceMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m.at(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_export_attention(const std::string& ckpt_path, std::string vocab_path,
                         const std::string& sentence_a, const std::string& sentence_b,
                         const std::string& out_path) {
  if (vocab_path.empty()) vocab_path = default_vocab_path(ckpt_path);
  coin::Vocabulary vocab;
  auto ckpt = load_checked(ckpt_path, vocab_path, vocab);

  coin::PairExample ex;
  ex.a = coin::tokenize(sentence_a, ckpt.config.mode);
  ex.b = coin::tokenize(sentence_b, ckpt.config.mode);
  auto batch = coin::make_batch({ex}, vocab, ckpt.config.seq_len);

  coin::Graph g;
  coin::Rng rng(0);
  auto result = coin::forward(g, batch, ckpt.params, ckpt.config, /*training=*/false, rng,
                              /*capture_traces=*/true);
  const auto& trace = result.traces[0];

  // Cropping never drops a real token unless the sentence was cut at len.
  std::vector<std::string> tokens_a(ex.a.begin(), ex.a.begin() + trace.len_a);
  std::vector<std::string> tokens_b(ex.b.begin(), ex.b.begin() + trace.len_b);

  ordered_json j;
  j["config"] = nlohmann::json::parse(coin::model_config_to_json(ckpt.config));
  j["tokens_a"] = tokens_a;
  j["tokens_b"] = tokens_b;
  ordered_json blocks = ordered_json::array();
  for (const auto& b : trace.blocks) {
    ordered_json bj;
    bj["row_attention"] = matrix_json(b.row_attn);
    bj["col_attention"] = matrix_json(b.col_attn);
    bj["self_attention_a"] = matrix_json(b.self_a);
    bj["self_attention_b"] = matrix_json(b.self_b);
    blocks.push_back(std::move(bj));
  }
  j["blocks"] = std::move(blocks);

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw coin::ConfigError("cannot write " + out_path);
  out << j.dump(2) << "\n";
  out.close();

  const fs::path stem = fs::path(out_path).parent_path() / fs::path(out_path).stem();
  for (std::size_t k = 0; k < trace.blocks.size(); ++k) {
    write_block_csv(stem.string() + ".block" + std::to_string(k + 1) + ".csv",
                    trace.blocks[k].row_attn, tokens_a, tokens_b);
  }
  std::printf("wrote %s (+%zu CSV files), %zu blocks\n", out_path.c_str(), trace.blocks.size(),
              trace.blocks.size());
  return 0;
}

int cmd_param_count(RunConfig rc, const std::string& vocab_path) {
  rc.resolve();
  const auto config = rc.model_config();
  std::size_t vocab_size = 0;
  if (!vocab_path.empty()) vocab_size = coin::Vocabulary::load(vocab_path).size();
  const auto rep = coin::param_count_report(config, vocab_size);
  std::printf("%-38s %14s\n", "component", "parameters");
  for (const auto& row : rep.rows) std::printf("%-38s %14zu\n", row.component.c_str(), row.count);
  std::printf("%-38s %14zu\n", "total (excluding embeddings)", rep.total_excluding_embeddings);
  if (vocab_size > 0) {
    std::printf("%-38s %14zu\n",
                ("embeddings (|V|=" + std::to_string(vocab_size) + ")").c_str(),
                rep.embedding_count);
    std::printf("%-38s %14zu\n", "total (including embeddings)", rep.total_including_embeddings);
  } else {
    std::printf("%-38s %14s\n", "embeddings", "n/a (pass --vocab)");
  }
  if (rc.blocks == 3 && rc.mode == "word") {
    std::printf("reference: the published Quora configuration of this architecture reports "
                "6.5M parameters\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"COIN: context-aware interaction network for sentence-pair matching"};
  app.require_subcommand(1);

  RunConfig rc;
  try {
    apply_env_seed(rc);
    const std::string config_path = find_config_arg(argc, argv);
    if (!config_path.empty()) apply_config_file(rc, config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  auto* train = app.add_subcommand("train", "Train a model and write checkpoint/vocab/report");
  add_model_flags(train, rc);
  add_train_flags(train, rc);

  std::string ckpt_path, vocab_path, data_path, out_path, ensemble_list;
  std::string sentence_a, sentence_b;
  std::size_t eval_batch = 64;

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a TSV corpus");
  eval->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  eval->add_option("--vocab", vocab_path, "Vocabulary JSON (default: vocab.json next to checkpoint)");
  eval->add_option("--data", data_path, "TSV corpus")->required();
  eval->add_option("--out", out_path, "Metrics JSON output path");
  eval->add_option("--batch_size", eval_batch, "Evaluation batch size")->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Classify one sentence pair");
  predict->add_option("--checkpoint", ckpt_path, "Checkpoint file");
  predict->add_option("--ensemble", ensemble_list, "Comma-separated checkpoints, majority vote");
  predict->add_option("--vocab", vocab_path, "Vocabulary JSON");
  predict->add_option("sentence_a", sentence_a, "First sentence")->required();
  predict->add_option("sentence_b", sentence_b, "Second sentence")->required();

  auto* exp = app.add_subcommand("export-attention", "Dump per-block attention matrices");
  exp->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  exp->add_option("--vocab", vocab_path, "Vocabulary JSON");
  exp->add_option("sentence_a", sentence_a, "First sentence")->required();
  exp->add_option("sentence_b", sentence_b, "Second sentence")->required();
  exp->add_option("--out", out_path, "Output JSON path")->required();

  auto* pc = app.add_subcommand("param-count", "Print per-component parameter counts");
  add_model_flags(pc, rc);
  pc->add_option("--vocab", vocab_path, "Vocabulary JSON to size the embedding table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(rc);
    if (eval->parsed()) return cmd_eval(ckpt_path, vocab_path, data_path, out_path, eval_batch);
    if (predict->parsed())
      return cmd_predict(ckpt_path, ensemble_list, vocab_path, sentence_a, sentence_b);
    if (exp->parsed())
      return cmd_export_attention(ckpt_path, vocab_path, sentence_a, sentence_b, out_path);
    if (pc->parsed()) return cmd_param_count(rc, vocab_path);
  } catch (const coin::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const coin::ArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
