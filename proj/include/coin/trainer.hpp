#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "coin/model.hpp"

namespace coin {

/// Mean over the batch of -log softmax(logits)[label], log-sum-exp stable.
TensorPtr cross_entropy_loss(Graph& g, const TensorPtr& logits, const std::vector<int>& labels);

struct OptimizerState {
  double base_lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay_rate = 0.95;  // per-epoch multiplicative lr factor
  double clip_threshold = 5.0;
  double l2_coeff = 1e-5;
  std::size_t t = 0;  // adam step counter
  std::vector<std::vector<real>> m, v;

  void init(const std::vector<TensorPtr>& params);
  double lr_for_epoch(std::size_t epoch) const;
};

/// Global-norm clipping over the .grad of every tensor: if the joint L2
/// norm exceeds threshold, every gradient is scaled by threshold/norm.
/// Returns the pre-clip norm.
double clip_gradients(const std::vector<TensorPtr>& params, double threshold);

/// One Adam update with bias correction. Expects already-clipped grads;
/// the L2 term l2_coeff*theta joins the gradient before the moment
/// updates. Effective lr = base_lr * decay_rate^epoch.
void adam_step(const std::vector<TensorPtr>& params, OptimizerState& state, std::size_t epoch);

struct Metrics {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  std::size_t n = 0;
};

/// Confusion-matrix metrics with Duplicate (label 1) as the positive class.
Metrics metrics_from_predictions(const std::vector<int>& predictions,
                                 const std::vector<int>& gold);

Metrics evaluate_metrics(const ModelParams& params, const std::vector<PairExample>& dataset,
                         const Vocabulary& vocab, const ModelConfig& config,
                         std::size_t batch_size = 64);

std::vector<int> predict_labels(const ModelParams& params, const Batch& batch,
                                const ModelConfig& config);

/// Per-pair softmax probability of the Duplicate class.
std::vector<double> predict_duplicate_probs(const ModelParams& params, const Batch& batch,
                                            const ModelConfig& config);

struct EnsembleMember {
  const ModelParams* params;
  const ModelConfig* config;
};

/// Majority vote across members; a tied vote goes to Duplicate iff the
/// mean Duplicate probability is at least 0.5.
std::vector<int> ensemble_vote(const std::vector<EnsembleMember>& members, const Batch& batch);

struct TrainSettings {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 12345;
  double lr = 0.001;
  double decay = 0.95;
  double clip = 5.0;
  double l2 = 1e-5;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0;
  double lr = 0;
  Metrics dev;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  double wall_seconds = 0;  // console-only; never written into artifacts
};

struct TrainResult {
  ModelParams params;  // snapshot from the best dev-accuracy epoch
  TrainReport report;
};

/// Full recipe: per epoch shuffle/batch, forward, cross-entropy, backward,
/// global clip, Adam with decayed lr; dev evaluation each epoch; the
/// returned parameters come from the best dev-accuracy epoch. Throws
/// DivergenceError on a non-finite loss. `on_epoch`, when set, observes
/// each finished epoch row.
TrainResult train(const ModelConfig& config, const TrainSettings& settings,
                  const std::vector<PairExample>& train_set,
                  const std::vector<PairExample>& dev_set, const Vocabulary& vocab,
                  const EmbeddingTable& emb,
                  const std::function<void(const EpochStats&)>& on_epoch = nullptr);

}  // namespace coin
