#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace coin {

#ifdef COIN_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

/// Deterministic random source. Draws map mt19937_64 output through
/// explicit bit manipulation (no distribution objects), so identical
/// seeds produce identical sequences on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [lo, hi), 53 random bits.
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n);

  /// Bernoulli draw: true with probability p.
  bool keep(double p) { return uniform(0.0, 1.0) < p; }

 private:
  std::mt19937_64 gen_;
};

/// Dense row-major tensor. `grad` stays empty until somebody accumulates
/// into it; ensure_grad() allocates zeros on demand. requires_grad
/// propagates through graph operations the usual way: an op output
/// requires grad iff any input does.
struct Tensor {
  Shape shape;
  std::vector<real> data;
  bool requires_grad = false;
  std::vector<real> grad;

  Tensor() = default;
  Tensor(Shape s, real fill);

  std::size_t size() const { return data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  real& at(std::size_t i, std::size_t j);
  real at(std::size_t i, std::size_t j) const;

  void ensure_grad();
  void zero_grad();
  bool all_finite() const;
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(Shape shape, std::vector<real> values, bool requires_grad = false);
TensorPtr zeros(Shape shape, bool requires_grad = false);
TensorPtr full(Shape shape, real value, bool requires_grad = false);
/// Glorot-uniform initialization: U(-sqrt(6/(fan_in+fan_out)), +...).
/// fan_in/fan_out are taken from the shape; conv kernels {w, in, out}
/// use w*in and w*out.
TensorPtr glorot_init(Shape shape, Rng& rng);
TensorPtr uniform_init(Shape shape, Rng& rng, double lo, double hi);

/// Define-by-run computation tape. Each operation executes eagerly and,
/// when any input requires grad, records a pull rule; backward() replays
/// the tape once in reverse. A Graph is built fresh per forward pass and
/// never shared between threads. Gradients ACCUMULATE: callers zero
/// parameter grads between steps.
class Graph {
 public:
  /// C = A·B for 2-D operands; dA += dC·Bᵀ, dB += Aᵀ·dC.
  TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
  TensorPtr transpose(const TensorPtr& x);

  TensorPtr add(const TensorPtr& a, const TensorPtr& b);
  TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
  TensorPtr hadamard(const TensorPtr& a, const TensorPtr& b);
  TensorPtr relu(const TensorPtr& x);
  TensorPtr sigmoid(const TensorPtr& x);

  /// y = x·w + b with b broadcast over rows. x: {n, in}, w: {in, out}, b: {out}.
  TensorPtr affine(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);

  /// Concatenate 1-D or 2-D tensors along `axis`. All non-concat extents
  /// must agree.
  TensorPtr concat(const std::vector<TensorPtr>& parts, std::size_t axis);

  TensorPtr reshape(const TensorPtr& x, Shape shape);

  /// Softmax along `axis` restricted to positions where mask is 1.
  /// mask is 1-D with length shape[axis] and applies to every slice.
  /// Masked positions output exactly 0; each slice of unmasked entries is
  /// positive and sums to 1. Throws if a slice has no unmasked entry.
  TensorPtr masked_softmax(const TensorPtr& logits, const TensorPtr& mask, std::size_t axis);

  /// Width-3 "same" 1-D convolution. x: {L, in}, kernel: {3, in, out},
  /// bias: {out}; input is zero-padded by one position on each side.
  TensorPtr conv1d_same(const TensorPtr& x, const TensorPtr& kernel, const TensorPtr& bias);

  /// Inverted dropout: kept entries are scaled by 1/keep so the
  /// expectation equals x. Identity when !training or keep == 1.
  TensorPtr dropout(const TensorPtr& x, double keep, bool training, Rng& rng);

  /// Gather rows of `table` by id. Gradients scatter-add back into the
  /// table rows when it requires grad.
  TensorPtr embedding_lookup(const TensorPtr& table, const std::vector<int>& ids);

  /// Zero the rows of x: {L, d} where mask: {L} is 0.
  TensorPtr zero_masked_rows(const TensorPtr& x, const TensorPtr& mask);

  /// Column-wise max over unmasked rows. x: {L, d} -> {1, d}.
  TensorPtr masked_max_pool(const TensorPtr& x, const TensorPtr& mask);

  /// Mean over the batch of -log softmax(logits_row)[label], computed via
  /// log-sum-exp. logits: {B, K}, labels in [0, K). Output is scalar {1}.
  TensorPtr softmax_cross_entropy(const TensorPtr& logits, const std::vector<int>& labels);

  /// Reverse sweep from a scalar loss. Visits each recorded node once,
  /// newest first; nodes whose output never received a gradient are
  /// skipped, so off-path parameters end with zero (untouched) grads.
  void backward(const TensorPtr& loss);

  std::size_t node_count() const { return tape_.size(); }

 private:
  struct Node {
    TensorPtr output;
    std::function<void()> pull;
  };
  std::vector<Node> tape_;

  TensorPtr record(TensorPtr out, bool track, std::function<void()> pull);
};

}  // namespace coin
