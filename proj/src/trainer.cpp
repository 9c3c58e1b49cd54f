#include "coin/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "coin/errors.hpp"

namespace coin {

TensorPtr cross_entropy_loss(Graph& g, const TensorPtr& logits, const std::vector<int>& labels) {
  return g.softmax_cross_entropy(logits, labels);
}

void OptimizerState::init(const std::vector<TensorPtr>& params) {
  t = 0;
  m.clear();
  v.clear();
  for (const auto& p : params) {
    m.emplace_back(p->size(), real(0));
    v.emplace_back(p->size(), real(0));
  }
}

double OptimizerState::lr_for_epoch(std::size_t epoch) const {
  return base_lr * std::pow(decay_rate, static_cast<double>(epoch));
}

double clip_gradients(const std::vector<TensorPtr>& params, double threshold) {
  if (threshold <= 0) throw ConfigError("clip_gradients: threshold must be positive");
  double sq = 0;
  for (const auto& p : params) {
    for (real gval : p->grad) sq += static_cast<double>(gval) * static_cast<double>(gval);
  }
  const double norm = std::sqrt(sq);
  if (norm > threshold) {
    const real scale = static_cast<real>(threshold / norm);
    for (const auto& p : params) {
      for (real& gval : p->grad) gval *= scale;
    }
  }
  return norm;
}

void adam_step(const std::vector<TensorPtr>& params, OptimizerState& state, std::size_t epoch) {
  if (state.m.size() != params.size()) {
    throw ConfigError("adam_step: optimizer state does not match parameter list");
  }
  state.t += 1;
  const double lr = state.lr_for_epoch(epoch);
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    p.ensure_grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double grad = static_cast<double>(p.grad[k]) +
                          state.l2_coeff * static_cast<double>(p.data[k]);
      m[k] = static_cast<real>(state.beta1 * m[k] + (1.0 - state.beta1) * grad);
      v[k] = static_cast<real>(state.beta2 * v[k] + (1.0 - state.beta2) * grad * grad);
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p.data[k] -= static_cast<real>(lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

Metrics metrics_from_predictions(const std::vector<int>& predictions,
                                 const std::vector<int>& gold) {
  if (predictions.size() != gold.size()) {
    throw ConfigError("metrics: prediction/gold size mismatch");
  }
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predictions[i] == gold[i]) ++correct;
    if (predictions[i] == 1 && gold[i] == 1) ++tp;
    if (predictions[i] == 1 && gold[i] == 0) ++fp;
    if (predictions[i] == 0 && gold[i] == 1) ++fn;
  }
  Metrics m;
  m.n = gold.size();
  m.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / gold.size();
  m.precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
  m.recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
  m.f1 = (m.precision + m.recall) == 0.0 ? 0.0
                                         : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

std::vector<int> predict_labels(const ModelParams& params, const Batch& batch,
                                const ModelConfig& config) {
  Graph g;
  Rng rng(0);  // inference applies no dropout
  auto out = forward(g, batch, params, config, /*training=*/false, rng);
  std::vector<int> labels(batch.size);
  for (std::size_t i = 0; i < batch.size; ++i) {
    labels[i] = out.logits->data[i * 2 + 1] > out.logits->data[i * 2] ? 1 : 0;
  }
  return labels;
}

std::vector<double> predict_duplicate_probs(const ModelParams& params, const Batch& batch,
                                            const ModelConfig& config) {
  Graph g;
  Rng rng(0);
  auto out = forward(g, batch, params, config, false, rng);
  std::vector<double> probs(batch.size);
  for (std::size_t i = 0; i < batch.size; ++i) {
    const double l0 = out.logits->data[i * 2];
    const double l1 = out.logits->data[i * 2 + 1];
    const double mx = std::max(l0, l1);
    const double e0 = std::exp(l0 - mx), e1 = std::exp(l1 - mx);
    probs[i] = e1 / (e0 + e1);
  }
  return probs;
}

Metrics evaluate_metrics(const ModelParams& params, const std::vector<PairExample>& dataset,
                         const Vocabulary& vocab, const ModelConfig& config,
                         std::size_t batch_size) {
  if (dataset.empty()) throw ConfigError("evaluate_metrics: empty dataset");
  std::vector<int> preds, gold;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    const std::size_t end = std::min(dataset.size(), start + batch_size);
    std::vector<PairExample> slice(dataset.begin() + start, dataset.begin() + end);
    auto batch = make_batch(slice, vocab, config.seq_len);
    auto labels = predict_labels(params, batch, config);
    preds.insert(preds.end(), labels.begin(), labels.end());
    gold.insert(gold.end(), batch.labels.begin(), batch.labels.end());
  }
  return metrics_from_predictions(preds, gold);
}

std::vector<int> ensemble_vote(const std::vector<EnsembleMember>& members, const Batch& batch) {
  if (members.empty()) throw ConfigError("ensemble_vote: empty model list");
  std::vector<std::size_t> votes(batch.size, 0);
  std::vector<double> prob_sum(batch.size, 0.0);
  for (const auto& member : members) {
    auto probs = predict_duplicate_probs(*member.params, batch, *member.config);
    for (std::size_t i = 0; i < batch.size; ++i) {
      prob_sum[i] += probs[i];
      if (probs[i] > 0.5) ++votes[i];
    }
  }
  std::vector<int> labels(batch.size);
  for (std::size_t i = 0; i < batch.size; ++i) {
    const std::size_t against = members.size() - votes[i];
    if (votes[i] > against) {
      labels[i] = 1;
    } else if (votes[i] < against) {
      labels[i] = 0;
    } else {
      labels[i] = prob_sum[i] / members.size() >= 0.5 ? 1 : 0;
    }
  }
  return labels;
}

namespace {

// Keeps the PAD embedding row out of every update so padded positions stay
// exactly zero.
void zero_pad_row_grad(const ModelParams& params) {
  if (!params.embedding_trainable) return;
  const std::size_t d = params.embedding->shape[1];
  params.embedding->ensure_grad();
  for (std::size_t j = 0; j < d; ++j) params.embedding->grad[Vocabulary::kPadId * d + j] = real(0);
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return seed * 6364136223846793005ull + 1442695040888963407ull * (epoch + 1);
}

}  // namespace

TrainResult train(const ModelConfig& config, const TrainSettings& settings,
                  const std::vector<PairExample>& train_set,
                  const std::vector<PairExample>& dev_set, const Vocabulary& vocab,
                  const EmbeddingTable& emb,
                  const std::function<void(const EpochStats&)>& on_epoch) {
  if (train_set.empty() || dev_set.empty()) {
    throw ConfigError("train: training and dev sets must be nonempty");
  }
  const auto t0 = std::chrono::steady_clock::now();

  Rng init_rng(config.seed);
  ModelParams params = init_params(config, emb, init_rng);
  auto trainables = params.trainable();

  OptimizerState opt;
  opt.base_lr = settings.lr;
  opt.decay_rate = settings.decay;
  opt.clip_threshold = settings.clip;
  opt.l2_coeff = settings.l2;
  opt.init(trainables);

  Rng dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ull);

  TrainResult result;
  result.params = params.clone();
  double best_acc = -1.0;

  for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
    auto batches = batch_examples(train_set, vocab, config.seq_len, settings.batch_size,
                                  epoch_seed(settings.seed, epoch));
    double loss_sum = 0;
    std::size_t n_examples = 0;
    for (const auto& batch : batches) {
      Graph g;
      auto out = forward(g, batch, params, config, /*training=*/true, dropout_rng);
      auto loss = cross_entropy_loss(g, out.logits, batch.labels);
      const double loss_value = static_cast<double>(loss->data[0]);
      if (!std::isfinite(loss_value)) {
        throw DivergenceError("training diverged: non-finite loss at epoch " +
                              std::to_string(epoch));
      }
      loss_sum += loss_value * batch.size;
      n_examples += batch.size;
      for (const auto& p : trainables) p->zero_grad();
      g.backward(loss);
      zero_pad_row_grad(params);
      clip_gradients(trainables, opt.clip_threshold);
      adam_step(trainables, opt, epoch);
    }

    EpochStats row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(n_examples);
    row.lr = opt.lr_for_epoch(epoch);
    row.dev = evaluate_metrics(params, dev_set, vocab, config, settings.batch_size);
    if (row.dev.accuracy > best_acc) {
      best_acc = row.dev.accuracy;
      result.params = params.clone();
      result.report.best_epoch = epoch;
    }
    result.report.epochs.push_back(row);
    if (on_epoch) on_epoch(row);
  }

  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace coin
