#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coin/data.hpp"
#include "coin/tensor.hpp"

namespace coin {

enum class Fusion { kGate, kSimple };
enum class PoolingKind { kMultiHead, kMax };

Fusion fusion_from_string(const std::string& s);
PoolingKind pooling_from_string(const std::string& s);
std::string to_string(Fusion f);
std::string to_string(PoolingKind p);

struct ModelConfig {
  TokenMode mode = TokenMode::kWord;
  std::size_t d_emb = 300;              // 300 word / 200 char
  std::size_t d_model = 150;
  std::size_t d_ffn = 300;
  std::size_t n_blocks = 3;             // 3 Quora / 2 LCQMC
  std::size_t n_heads = 5;              // must divide d_model
  std::size_t n_encoder_layers = 2;
  std::size_t n_agg_layers = 1;
  std::size_t seq_len = 32;             // 32 Quora / 50 LCQMC
  double keep_prob = 0.8;
  bool use_context = true;
  Fusion fusion = Fusion::kGate;
  bool use_aggregation = true;
  PoolingKind pooling = PoolingKind::kMultiHead;
  std::size_t classifier_hidden = 300;
  std::uint64_t seed = 12345;

  std::size_t d_input() const { return d_emb + d_model; }
  void validate() const;
};

struct FeedForward {
  TensorPtr w;  // {in, out}
  TensorPtr b;  // {out}
};

struct ConvLayer {
  TensorPtr kernel;  // {3, in, out}
  TensorPtr bias;    // {out}
};

/// One interaction block. Both sentences flow through the same instances;
/// each block owns an independent set.
struct BlockParams {
  TensorPtr wc;                      // {d, d}, absent without context
  FeedForward f1;                    // {d, d_ffn}, attention transform
  // gate fusion
  FeedForward g1, g2, g3;            // {2d, d} comparison views
  FeedForward combine;               // {3d, d}
  TensorPtr w1, w2, bg;              // gate: {d, d}, {d, d}, {d}
  // simple-fusion ablation
  FeedForward simple;                // {2d, d}
};

struct PoolHead {
  TensorPtr wa;  // {d, 1} score projection
  TensorPtr wv;  // {d, d_h} value projection
};

struct ModelParams {
  TensorPtr embedding;  // {|V|, d_emb}
  bool embedding_trainable = true;
  std::vector<ConvLayer> encoder;           // n_encoder_layers
  FeedForward input_proj;                   // {d_emb + d_model, d_model}
  std::vector<BlockParams> blocks;
  std::optional<ConvLayer> aggregation;
  std::vector<PoolHead> pool_heads;         // empty for max pooling
  FeedForward cls_hidden;                   // {4*d_model, hidden}
  FeedForward cls_out;                      // {hidden, 2}

  /// Every tensor in the documented checkpoint order.
  std::vector<std::pair<std::string, TensorPtr>> named_tensors() const;
  /// Tensors updated by the optimizer (skips a frozen embedding).
  std::vector<TensorPtr> trainable() const;
  ModelParams clone() const;
  bool all_finite() const;
};

/// Fresh parameters. The embedding table is adopted from `emb`; everything
/// else is Glorot-uniform with zero biases, drawn from rng in checkpoint
/// order.
ModelParams init_params(const ModelConfig& config, const EmbeddingTable& emb, Rng& rng);

/// Trainable scalar count excluding embedding tables; a pure function of
/// the configuration.
std::size_t param_count(const ModelConfig& config);

struct ParamCountRow {
  std::string component;
  std::size_t count;
};
struct ParamCountReport {
  std::vector<ParamCountRow> rows;
  std::size_t total_excluding_embeddings = 0;
  std::size_t embedding_count = 0;
  std::size_t total_including_embeddings = 0;
};
ParamCountReport param_count_report(const ModelConfig& config, std::size_t vocab_size);

struct TraceMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> values;
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

struct BlockTrace {
  TraceMatrix row_attn;  // m x n, each row sums to 1
  TraceMatrix col_attn;  // m x n, each column sums to 1
  TraceMatrix self_a;    // m x m row-normalized, empty without context
  TraceMatrix self_b;    // n x n
};

struct AttentionTrace {
  std::size_t len_a = 0, len_b = 0;  // real (unpadded) lengths
  std::vector<BlockTrace> blocks;
};

// --- layer operations (one sentence / one pair at a time) ---------------
// Sequences are row-major {L, d} with one row per token. All masks are
// 1-D {L} tensors of 0/1.

struct SelfAlignResult {
  TensorPtr context;  // {L, d}, masked rows zeroed
  TensorPtr weights;  // {L, L} row-normalized attention
  TensorPtr scores;   // {L, L} raw Gram matrix, exactly symmetric
};

/// A = ReLU(H Wc)(ReLU(H Wc))ᵀ, C = rowsoftmax(A)·H.
SelfAlignResult self_align_context(Graph& g, const TensorPtr& h, const TensorPtr& mask,
                                   const TensorPtr& wc);

/// E[i][j] = F1(h_a_i [+ c_a_i])ᵀ F1(h_b_j [+ c_b_j]). Context tensors may
/// be null when use_context is false.
TensorPtr attention_scores(Graph& g, const TensorPtr& ha, const TensorPtr& hb,
                           const TensorPtr& ca, const TensorPtr& cb, const FeedForward& f1,
                           bool use_context, double keep_prob = 1.0, bool training = false,
                           Rng* rng = nullptr);

struct AlignResult {
  TensorPtr aligned_a;  // {m, d}
  TensorPtr aligned_b;  // {n, d}
  TensorPtr row_attn;   // {m, n}
  TensorPtr col_attn;   // {m, n}
};

AlignResult align(Graph& g, const TensorPtr& e, const TensorPtr& ha, const TensorPtr& hb,
                  const TensorPtr& mask_a, const TensorPtr& mask_b);

/// h~ = ReLU(Wf [G1([h;h']); G2([h;h-h']); G3([h;h.h'])] + bf)
TensorPtr fuse_views(Graph& g, const TensorPtr& h, const TensorPtr& aligned,
                     const BlockParams& bp, double keep_prob = 1.0, bool training = false,
                     Rng* rng = nullptr);

/// f = sigmoid(W1 h + W2 h~ + bg); out = f.h + (1-f).h~
TensorPtr gate_blend(Graph& g, const TensorPtr& h, const TensorPtr& h_tilde,
                     const BlockParams& bp);

TensorPtr gate_fusion(Graph& g, const TensorPtr& h, const TensorPtr& aligned,
                      const BlockParams& bp, Fusion variant, double keep_prob = 1.0,
                      bool training = false, Rng* rng = nullptr);

struct BlockResult {
  TensorPtr ha;
  TensorPtr hb;
};

/// Full block: per-sentence self-alignment context, context-aware scores,
/// bidirectional alignment, gate fusion, masked rows re-zeroed. Fills
/// *trace (cropped to real lengths) when non-null.
BlockResult interaction_block(Graph& g, const TensorPtr& ha, const TensorPtr& hb,
                              const TensorPtr& mask_a, const TensorPtr& mask_b,
                              const BlockParams& bp, const ModelConfig& config,
                              BlockTrace* trace, double keep_prob = 1.0, bool training = false,
                              Rng* rng = nullptr);

/// Embedding lookup + dropout + the convolutional encoder stack; output is
/// [embedding; conv features] per token with PAD rows zeroed. {L, d_emb+d_model}.
TensorPtr encode_inputs(Graph& g, const std::vector<int>& ids, const TensorPtr& mask,
                        const ModelParams& params, const ModelConfig& config, bool training,
                        Rng& rng);

/// One conv+ReLU layer, or identity when aggregation is ablated.
TensorPtr aggregate(Graph& g, const TensorPtr& h, const ModelParams& params,
                    const ModelConfig& config);

/// Attention-weighted per-head summaries concatenated to {1, d_model}, or
/// masked elementwise max for the max-pooling ablation.
TensorPtr multi_head_pool(Graph& g, const TensorPtr& v, const TensorPtr& mask,
                          const ModelParams& params, const ModelConfig& config);

/// [va; vb; va-vb; va.vb], width 4*d_model.
TensorPtr combine_features(Graph& g, const TensorPtr& va, const TensorPtr& vb);

/// combine_features -> ReLU hidden (+dropout) -> 2 logits. {1, 2}.
TensorPtr combine_and_predict(Graph& g, const TensorPtr& va, const TensorPtr& vb,
                              const ModelParams& params, const ModelConfig& config,
                              bool training, Rng& rng);

struct ForwardResult {
  TensorPtr logits;  // {B, 2}
  std::vector<AttentionTrace> traces;  // one per pair when captured
};

ForwardResult forward(Graph& g, const Batch& batch, const ModelParams& params,
                      const ModelConfig& config, bool training, Rng& rng,
                      bool capture_traces = false);

TensorPtr mask_tensor(const std::vector<int>& mask01);

}  // namespace coin
