#include "coin/model.hpp"

#include <algorithm>
#include <cmath>

#include "coin/errors.hpp"

namespace coin {

Fusion fusion_from_string(const std::string& s) {
  if (s == "gate") return Fusion::kGate;
  if (s == "simple") return Fusion::kSimple;
  throw ConfigError("unknown fusion variant '" + s + "' (expected 'gate' or 'simple')");
}

PoolingKind pooling_from_string(const std::string& s) {
  if (s == "multihead") return PoolingKind::kMultiHead;
  if (s == "max") return PoolingKind::kMax;
  throw ConfigError("unknown pooling variant '" + s + "' (expected 'multihead' or 'max')");
}

std::string to_string(Fusion f) { return f == Fusion::kGate ? "gate" : "simple"; }
std::string to_string(PoolingKind p) { return p == PoolingKind::kMultiHead ? "multihead" : "max"; }

void ModelConfig::validate() const {
  if (d_emb == 0 || d_model == 0 || d_ffn == 0 || classifier_hidden == 0) {
    throw ConfigError("model widths must be positive");
  }
  if (n_blocks == 0) throw ConfigError("n_blocks must be at least 1");
  if (seq_len == 0) throw ConfigError("seq_len must be at least 1");
  if (keep_prob <= 0.0 || keep_prob > 1.0) {
    throw ConfigError("keep_prob must be in (0, 1], got " + std::to_string(keep_prob));
  }
  if (pooling == PoolingKind::kMultiHead) {
    if (n_heads == 0 || d_model % n_heads != 0) {
      throw ConfigError("d_model (" + std::to_string(d_model) +
                        ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
    }
  }
  if (n_encoder_layers == 0) throw ConfigError("encoder needs at least one layer");
}

std::vector<std::pair<std::string, TensorPtr>> ModelParams::named_tensors() const {
  std::vector<std::pair<std::string, TensorPtr>> out;
  out.emplace_back("embedding", embedding);
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    out.emplace_back("encoder." + std::to_string(i) + ".kernel", encoder[i].kernel);
    out.emplace_back("encoder." + std::to_string(i) + ".bias", encoder[i].bias);
  }
  out.emplace_back("input_proj.w", input_proj.w);
  out.emplace_back("input_proj.b", input_proj.b);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string p = "block." + std::to_string(i) + ".";
    const BlockParams& bp = blocks[i];
    if (bp.wc) out.emplace_back(p + "wc", bp.wc);
    out.emplace_back(p + "f1.w", bp.f1.w);
    out.emplace_back(p + "f1.b", bp.f1.b);
    if (bp.simple.w) {
      out.emplace_back(p + "simple.w", bp.simple.w);
      out.emplace_back(p + "simple.b", bp.simple.b);
    } else {
      out.emplace_back(p + "g1.w", bp.g1.w);
      out.emplace_back(p + "g1.b", bp.g1.b);
      out.emplace_back(p + "g2.w", bp.g2.w);
      out.emplace_back(p + "g2.b", bp.g2.b);
      out.emplace_back(p + "g3.w", bp.g3.w);
      out.emplace_back(p + "g3.b", bp.g3.b);
      out.emplace_back(p + "combine.w", bp.combine.w);
      out.emplace_back(p + "combine.b", bp.combine.b);
      out.emplace_back(p + "gate.w1", bp.w1);
      out.emplace_back(p + "gate.w2", bp.w2);
      out.emplace_back(p + "gate.bg", bp.bg);
    }
  }
  if (aggregation) {
    out.emplace_back("aggregation.kernel", aggregation->kernel);
    out.emplace_back("aggregation.bias", aggregation->bias);
  }
  for (std::size_t z = 0; z < pool_heads.size(); ++z) {
    out.emplace_back("pool." + std::to_string(z) + ".wa", pool_heads[z].wa);
    out.emplace_back("pool." + std::to_string(z) + ".wv", pool_heads[z].wv);
  }
  out.emplace_back("cls_hidden.w", cls_hidden.w);
  out.emplace_back("cls_hidden.b", cls_hidden.b);
  out.emplace_back("cls_out.w", cls_out.w);
  out.emplace_back("cls_out.b", cls_out.b);
  return out;
}

std::vector<TensorPtr> ModelParams::trainable() const {
  std::vector<TensorPtr> out;
  for (const auto& [name, t] : named_tensors()) {
    if (t == embedding && !embedding_trainable) continue;
    out.push_back(t);
  }
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams copy = *this;
  auto deep = [](TensorPtr& t) {
    if (t) t = make_tensor(t->shape, t->data, t->requires_grad);
  };
  deep(copy.embedding);
  for (auto& c : copy.encoder) {
    deep(c.kernel);
    deep(c.bias);
  }
  deep(copy.input_proj.w);
  deep(copy.input_proj.b);
  for (auto& bp : copy.blocks) {
    deep(bp.wc);
    deep(bp.f1.w);
    deep(bp.f1.b);
    deep(bp.g1.w);
    deep(bp.g1.b);
    deep(bp.g2.w);
    deep(bp.g2.b);
    deep(bp.g3.w);
    deep(bp.g3.b);
    deep(bp.combine.w);
    deep(bp.combine.b);
    deep(bp.w1);
    deep(bp.w2);
    deep(bp.bg);
    deep(bp.simple.w);
    deep(bp.simple.b);
  }
  if (copy.aggregation) {
    deep(copy.aggregation->kernel);
    deep(copy.aggregation->bias);
  }
  for (auto& h : copy.pool_heads) {
    deep(h.wa);
    deep(h.wv);
  }
  deep(copy.cls_hidden.w);
  deep(copy.cls_hidden.b);
  deep(copy.cls_out.w);
  deep(copy.cls_out.b);
  return copy;
}

bool ModelParams::all_finite() const {
  for (const auto& [name, t] : named_tensors()) {
    if (!t->all_finite()) return false;
  }
  return true;
}

namespace {

FeedForward make_ff(std::size_t in, std::size_t out, Rng& rng) {
  return {glorot_init({in, out}, rng), zeros({out}, true)};
}

ConvLayer make_conv(std::size_t in, std::size_t out, Rng& rng) {
  return {glorot_init({3, in, out}, rng), zeros({out}, true)};
}

}  // namespace

ModelParams init_params(const ModelConfig& config, const EmbeddingTable& emb, Rng& rng) {
  config.validate();
  if (emb.dim != config.d_emb) {
    throw ConfigError("embedding width " + std::to_string(emb.dim) + " does not match d_emb " +
                      std::to_string(config.d_emb));
  }
  const std::size_t d = config.d_model;
  ModelParams p;
  p.embedding = emb.table;
  p.embedding_trainable = emb.trainable;
  std::size_t in = config.d_emb;
  for (std::size_t i = 0; i < config.n_encoder_layers; ++i) {
    p.encoder.push_back(make_conv(in, d, rng));
    in = d;
  }
  p.input_proj = make_ff(config.d_input(), d, rng);
  for (std::size_t i = 0; i < config.n_blocks; ++i) {
    BlockParams bp;
    if (config.use_context) bp.wc = glorot_init({d, d}, rng);
    bp.f1 = make_ff(d, config.d_ffn, rng);
    if (config.fusion == Fusion::kGate) {
      bp.g1 = make_ff(2 * d, d, rng);
      bp.g2 = make_ff(2 * d, d, rng);
      bp.g3 = make_ff(2 * d, d, rng);
      bp.combine = make_ff(3 * d, d, rng);
      bp.w1 = glorot_init({d, d}, rng);
      bp.w2 = glorot_init({d, d}, rng);
      bp.bg = zeros({d}, true);
    } else {
      bp.simple = make_ff(2 * d, d, rng);
    }
    p.blocks.push_back(std::move(bp));
  }
  if (config.use_aggregation) p.aggregation = make_conv(d, d, rng);
  if (config.pooling == PoolingKind::kMultiHead) {
    const std::size_t dh = d / config.n_heads;
    for (std::size_t z = 0; z < config.n_heads; ++z) {
      PoolHead head;
      head.wa = glorot_init({d, 1}, rng);
      head.wv = glorot_init({d, dh}, rng);
      p.pool_heads.push_back(std::move(head));
    }
  }
  p.cls_hidden = make_ff(4 * d, config.classifier_hidden, rng);
  p.cls_out = make_ff(config.classifier_hidden, 2, rng);
  return p;
}

std::size_t param_count(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.d_model;
  std::size_t total = 0;
  std::size_t in = config.d_emb;
  for (std::size_t i = 0; i < config.n_encoder_layers; ++i) {
    total += 3 * in * d + d;
    in = d;
  }
  total += config.d_input() * d + d;  // input projection
  std::size_t block = config.d_ffn * d + config.d_ffn;  // f1
  if (config.use_context) block += d * d;
  if (config.fusion == Fusion::kGate) {
    block += 3 * (2 * d * d + d);  // g1..g3
    block += 3 * d * d + d;        // combine
    block += 2 * d * d + d;        // gate
  } else {
    block += 2 * d * d + d;  // simple fusion
  }
  total += config.n_blocks * block;
  if (config.use_aggregation) total += 3 * d * d + d;
  if (config.pooling == PoolingKind::kMultiHead) {
    total += config.n_heads * d + d * d;  // wa per head; wv sums to d*d
  }
  total += 4 * d * config.classifier_hidden + config.classifier_hidden;
  total += config.classifier_hidden * 2 + 2;
  return total;
}

ParamCountReport param_count_report(const ModelConfig& config, std::size_t vocab_size) {
  config.validate();
  const std::size_t d = config.d_model;
  ParamCountReport rep;
  auto push = [&rep](const std::string& name, std::size_t n) {
    rep.rows.push_back({name, n});
    rep.total_excluding_embeddings += n;
  };
  std::size_t enc = 0, in = config.d_emb;
  for (std::size_t i = 0; i < config.n_encoder_layers; ++i) {
    enc += 3 * in * d + d;
    in = d;
  }
  push("encoder (" + std::to_string(config.n_encoder_layers) + " conv layers)", enc);
  push("input projection", config.d_input() * d + d);
  std::size_t block = config.d_ffn * d + config.d_ffn;
  if (config.use_context) block += d * d;
  if (config.fusion == Fusion::kGate) {
    block += 3 * (2 * d * d + d) + (3 * d * d + d) + (2 * d * d + d);
  } else {
    block += 2 * d * d + d;
  }
  push("interaction blocks (" + std::to_string(config.n_blocks) + ")", config.n_blocks * block);
  push("aggregation", config.use_aggregation ? 3 * d * d + d : 0);
  push("pooling", config.pooling == PoolingKind::kMultiHead ? config.n_heads * d + d * d : 0);
  push("classifier",
       4 * d * config.classifier_hidden + config.classifier_hidden + config.classifier_hidden * 2 + 2);
  rep.embedding_count = vocab_size * config.d_emb;
  rep.total_including_embeddings = rep.total_excluding_embeddings + rep.embedding_count;
  return rep;
}

TensorPtr mask_tensor(const std::vector<int>& mask01) {
  std::vector<real> v(mask01.size());
  for (std::size_t i = 0; i < mask01.size(); ++i) v[i] = mask01[i] ? real(1) : real(0);
  return make_tensor({mask01.size()}, std::move(v));
}

SelfAlignResult self_align_context(Graph& g, const TensorPtr& h, const TensorPtr& mask,
                                   const TensorPtr& wc) {
  auto x = g.relu(g.matmul(h, wc));
  auto scores = g.matmul(x, g.transpose(x));  // Gram matrix, symmetric by construction
  auto weights = g.masked_softmax(scores, mask, 1);
  auto context = g.zero_masked_rows(g.matmul(weights, h), mask);
  return {context, weights, scores};
}

TensorPtr attention_scores(Graph& g, const TensorPtr& ha, const TensorPtr& hb,
                           const TensorPtr& ca, const TensorPtr& cb, const FeedForward& f1,
                           bool use_context, double keep_prob, bool training, Rng* rng) {
  TensorPtr pa = ha, pb = hb;
  if (use_context) {
    if (!ca || !cb) throw ConfigError("attention_scores: context tensors required");
    pa = g.add(ha, ca);
    pb = g.add(hb, cb);
  }
  auto fa = g.relu(g.affine(pa, f1.w, f1.b));
  auto fb = g.relu(g.affine(pb, f1.w, f1.b));
  if (training && keep_prob < 1.0) {
    fa = g.dropout(fa, keep_prob, true, *rng);
    fb = g.dropout(fb, keep_prob, true, *rng);
  }
  return g.matmul(fa, g.transpose(fb));
}

AlignResult align(Graph& g, const TensorPtr& e, const TensorPtr& ha, const TensorPtr& hb,
                  const TensorPtr& mask_a, const TensorPtr& mask_b) {
  auto row_attn = g.masked_softmax(e, mask_b, 1);  // each a-token over b-tokens
  auto col_attn = g.masked_softmax(e, mask_a, 0);  // each b-token over a-tokens
  auto aligned_a = g.matmul(row_attn, hb);
  auto aligned_b = g.matmul(g.transpose(col_attn), ha);
  return {aligned_a, aligned_b, row_attn, col_attn};
}

TensorPtr fuse_views(Graph& g, const TensorPtr& h, const TensorPtr& aligned,
                     const BlockParams& bp, double keep_prob, bool training, Rng* rng) {
  auto v1 = g.relu(g.affine(g.concat({h, aligned}, 1), bp.g1.w, bp.g1.b));
  auto v2 = g.relu(g.affine(g.concat({h, g.sub(h, aligned)}, 1), bp.g2.w, bp.g2.b));
  auto v3 = g.relu(g.affine(g.concat({h, g.hadamard(h, aligned)}, 1), bp.g3.w, bp.g3.b));
  auto fused = g.relu(g.affine(g.concat({v1, v2, v3}, 1), bp.combine.w, bp.combine.b));
  if (training && keep_prob < 1.0) fused = g.dropout(fused, keep_prob, true, *rng);
  return fused;
}

TensorPtr gate_blend(Graph& g, const TensorPtr& h, const TensorPtr& h_tilde,
                     const BlockParams& bp) {
  auto f = g.sigmoid(g.add(g.affine(h, bp.w1, bp.bg), g.matmul(h_tilde, bp.w2)));
  auto ones = full(f->shape, real(1));
  return g.add(g.hadamard(f, h), g.hadamard(g.sub(ones, f), h_tilde));
}

TensorPtr gate_fusion(Graph& g, const TensorPtr& h, const TensorPtr& aligned,
                      const BlockParams& bp, Fusion variant, double keep_prob, bool training,
                      Rng* rng) {
  if (variant == Fusion::kSimple) {
    return g.relu(g.affine(g.concat({h, aligned}, 1), bp.simple.w, bp.simple.b));
  }
  auto h_tilde = fuse_views(g, h, aligned, bp, keep_prob, training, rng);
  return gate_blend(g, h, h_tilde, bp);
}

namespace {

TraceMatrix crop_matrix(const TensorPtr& t, std::size_t rows, std::size_t cols) {
  TraceMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.values.resize(rows * cols);
  const std::size_t full_cols = t->cols();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m.values[i * cols + j] = static_cast<double>(t->data[i * full_cols + j]);
  return m;
}

std::size_t mask_count(const TensorPtr& mask) {
  std::size_t n = 0;
  for (real v : mask->data) n += v == real(1) ? 1 : 0;
  return n;
}

}  // namespace

BlockResult interaction_block(Graph& g, const TensorPtr& ha, const TensorPtr& hb,
                              const TensorPtr& mask_a, const TensorPtr& mask_b,
                              const BlockParams& bp, const ModelConfig& config,
                              BlockTrace* trace, double keep_prob, bool training, Rng* rng) {
  TensorPtr ca, cb;
  TensorPtr self_wa, self_wb;
  if (config.use_context) {
    auto sa = self_align_context(g, ha, mask_a, bp.wc);
    auto sb = self_align_context(g, hb, mask_b, bp.wc);
    ca = sa.context;
    cb = sb.context;
    self_wa = sa.weights;
    self_wb = sb.weights;
  }
  auto e = attention_scores(g, ha, hb, ca, cb, bp.f1, config.use_context, keep_prob, training, rng);
  auto al = align(g, e, ha, hb, mask_a, mask_b);
  auto out_a = gate_fusion(g, ha, al.aligned_a, bp, config.fusion, keep_prob, training, rng);
  auto out_b = gate_fusion(g, hb, al.aligned_b, bp, config.fusion, keep_prob, training, rng);
  out_a = g.zero_masked_rows(out_a, mask_a);
  out_b = g.zero_masked_rows(out_b, mask_b);
  if (trace) {
    const std::size_t m = mask_count(mask_a), n = mask_count(mask_b);
    trace->row_attn = crop_matrix(al.row_attn, m, n);
    trace->col_attn = crop_matrix(al.col_attn, m, n);
    if (config.use_context) {
      trace->self_a = crop_matrix(self_wa, m, m);
      trace->self_b = crop_matrix(self_wb, n, n);
    }
  }
  return {out_a, out_b};
}

TensorPtr encode_inputs(Graph& g, const std::vector<int>& ids, const TensorPtr& mask,
                        const ModelParams& params, const ModelConfig& config, bool training,
                        Rng& rng) {
  auto emb = g.embedding_lookup(params.embedding, ids);
  emb = g.dropout(emb, config.keep_prob, training, rng);
  auto h = emb;
  for (const auto& conv : params.encoder) {
    h = g.relu(g.conv1d_same(h, conv.kernel, conv.bias));
  }
  return g.zero_masked_rows(g.concat({emb, h}, 1), mask);
}

TensorPtr aggregate(Graph& g, const TensorPtr& h, const ModelParams& params,
                    const ModelConfig& config) {
  if (!config.use_aggregation) return h;
  if (!params.aggregation) throw ConfigError("aggregate: missing aggregation parameters");
  return g.relu(g.conv1d_same(h, params.aggregation->kernel, params.aggregation->bias));
}

TensorPtr multi_head_pool(Graph& g, const TensorPtr& v, const TensorPtr& mask,
                          const ModelParams& params, const ModelConfig& config) {
  if (config.pooling == PoolingKind::kMax) {
    return g.masked_max_pool(v, mask);
  }
  std::vector<TensorPtr> heads;
  for (const auto& head : params.pool_heads) {
    auto scores = g.masked_softmax(g.matmul(v, head.wa), mask, 0);  // {L, 1}
    auto values = g.matmul(v, head.wv);                             // {L, d_h}
    heads.push_back(g.matmul(g.transpose(scores), values));        // {1, d_h}
  }
  return g.concat(heads, 1);
}

TensorPtr combine_features(Graph& g, const TensorPtr& va, const TensorPtr& vb) {
  return g.concat({va, vb, g.sub(va, vb), g.hadamard(va, vb)}, 1);
}

TensorPtr combine_and_predict(Graph& g, const TensorPtr& va, const TensorPtr& vb,
                              const ModelParams& params, const ModelConfig& config,
                              bool training, Rng& rng) {
  auto joint = combine_features(g, va, vb);
  auto hidden = g.relu(g.affine(joint, params.cls_hidden.w, params.cls_hidden.b));
  hidden = g.dropout(hidden, config.keep_prob, training, rng);
  return g.affine(hidden, params.cls_out.w, params.cls_out.b);
}

ForwardResult forward(Graph& g, const Batch& batch, const ModelParams& params,
                      const ModelConfig& config, bool training, Rng& rng,
                      bool capture_traces) {
  if (batch.size == 0) throw ConfigError("forward: empty batch");
  ForwardResult result;
  std::vector<TensorPtr> logits_rows;
  for (std::size_t i = 0; i < batch.size; ++i) {
    const auto ids_a = batch.row_ids_a(i);
    const auto ids_b = batch.row_ids_b(i);
    auto mask_a = mask_tensor(batch.row_mask_a(i));
    auto mask_b = mask_tensor(batch.row_mask_b(i));

    auto ha = encode_inputs(g, ids_a, mask_a, params, config, training, rng);
    auto hb = encode_inputs(g, ids_b, mask_b, params, config, training, rng);
    ha = g.zero_masked_rows(g.affine(ha, params.input_proj.w, params.input_proj.b), mask_a);
    hb = g.zero_masked_rows(g.affine(hb, params.input_proj.w, params.input_proj.b), mask_b);

    AttentionTrace trace;
    if (capture_traces) {
      trace.blocks.resize(config.n_blocks);
      std::size_t la = 0, lb = 0;
      for (int m : batch.row_mask_a(i)) la += m;
      for (int m : batch.row_mask_b(i)) lb += m;
      trace.len_a = la;
      trace.len_b = lb;
    }
    for (std::size_t blk = 0; blk < config.n_blocks; ++blk) {
      BlockTrace* bt = capture_traces ? &trace.blocks[blk] : nullptr;
      auto res = interaction_block(g, ha, hb, mask_a, mask_b, params.blocks[blk], config, bt,
                                   config.keep_prob, training, &rng);
      ha = res.ha;
      hb = res.hb;
    }
    auto va = aggregate(g, ha, params, config);
    auto vb = aggregate(g, hb, params, config);
    auto pa = multi_head_pool(g, va, mask_a, params, config);
    auto pb = multi_head_pool(g, vb, mask_b, params, config);
    logits_rows.push_back(combine_and_predict(g, pa, pb, params, config, training, rng));
    if (capture_traces) result.traces.push_back(std::move(trace));
  }
  result.logits = logits_rows.size() == 1 ? logits_rows[0] : g.concat(logits_rows, 0);
  return result;
}

}  // namespace coin
