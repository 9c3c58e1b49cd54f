#include "coin/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace coin {

std::string shape_str(const Shape& shape) {
  if (shape.empty()) return "scalar";
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

double Rng::uniform(double lo, double hi) {
  // 53 high bits -> [0,1) with full double resolution.
  const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

std::uint64_t Rng::index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::index: n must be positive");
  // Modulo bias is < 2^-40 for any n we ever use; determinism is what matters.
  return gen_() % n;
}

namespace {

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
  }
}

void require_binary_mask(const Tensor& mask) {
  for (real v : mask.data) {
    if (v != real(0) && v != real(1)) {
      throw std::invalid_argument("mask entries must be 0 or 1");
    }
  }
}

}  // namespace

Tensor::Tensor(Shape s, real fill) : shape(std::move(s)), data(shape_product(shape), fill) {}

std::size_t Tensor::rows() const {
  if (shape.size() != 2) throw std::invalid_argument("rows(): tensor is not 2-D: " + shape_str(shape));
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (shape.size() != 2) throw std::invalid_argument("cols(): tensor is not 2-D: " + shape_str(shape));
  return shape[1];
}

real& Tensor::at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
real Tensor::at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), real(0));
}

void Tensor::zero_grad() { grad.assign(data.size(), real(0)); }

bool Tensor::all_finite() const {
  for (real v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

TensorPtr make_tensor(Shape shape, std::vector<real> values, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  if (shape_product(t->shape) != values.size()) {
    throw std::invalid_argument("make_tensor: " + std::to_string(values.size()) +
                                " values for shape " + shape_str(t->shape));
  }
  t->data = std::move(values);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr zeros(Shape shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(shape), real(0));
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr full(Shape shape, real value, bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(shape), value);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr glorot_init(Shape shape, Rng& rng) {
  std::size_t fan_in = 0, fan_out = 0;
  if (shape.size() == 2) {
    fan_in = shape[0];
    fan_out = shape[1];
  } else if (shape.size() == 3) {
    // conv kernel {width, in, out}
    fan_in = shape[0] * shape[1];
    fan_out = shape[0] * shape[2];
  } else if (shape.size() == 1) {
    fan_in = fan_out = shape[0];
  } else {
    throw std::invalid_argument("glorot_init: unsupported shape " + shape_str(shape));
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_init(std::move(shape), rng, -bound, bound);
}

TensorPtr uniform_init(Shape shape, Rng& rng, double lo, double hi) {
  auto t = zeros(std::move(shape), true);
  for (real& v : t->data) v = static_cast<real>(rng.uniform(lo, hi));
  return t;
}

TensorPtr Graph::record(TensorPtr out, bool track, std::function<void()> pull) {
  out->requires_grad = track;
  if (track) tape_.push_back(Node{out, std::move(pull)});
  return out;
}

TensorPtr Graph::matmul(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0]) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(a->shape) + " vs " +
                                shape_str(b->shape));
  }
  const std::size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
  auto out = zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const real av = a->data[i * k + t];
      if (av == real(0)) continue;
      const real* brow = &b->data[t * n];
      real* orow = &out->data[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return record(out, a->requires_grad || b->requires_grad, [a, b, out, m, k, n]() {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const real dv = out->grad[i * n + j];
          if (dv == real(0)) continue;
          for (std::size_t t = 0; t < k; ++t) a->grad[i * k + t] += dv * b->data[t * n + j];
        }
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < k; ++t) {
          const real av = a->data[i * k + t];
          if (av == real(0)) continue;
          for (std::size_t j = 0; j < n; ++j) b->grad[t * n + j] += av * out->grad[i * n + j];
        }
    }
  });
}

TensorPtr Graph::transpose(const TensorPtr& x) {
  const std::size_t m = x->rows(), n = x->cols();
  auto out = zeros({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->data[j * m + i] = x->data[i * n + j];
  return record(out, x->requires_grad, [x, out, m, n]() {
    x->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) x->grad[i * n + j] += out->grad[j * m + i];
  });
}

TensorPtr Graph::add(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape("add", *a, *b);
  auto out = zeros(a->shape);
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a->data[i] + b->data[i];
  return record(out, a->requires_grad || b->requires_grad, [a, b, out]() {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) b->grad[i] += out->grad[i];
    }
  });
}

TensorPtr Graph::sub(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape("sub", *a, *b);
  auto out = zeros(a->shape);
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a->data[i] - b->data[i];
  return record(out, a->requires_grad || b->requires_grad, [a, b, out]() {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) b->grad[i] -= out->grad[i];
    }
  });
}

TensorPtr Graph::hadamard(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape("hadamard", *a, *b);
  auto out = zeros(a->shape);
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a->data[i] * b->data[i];
  return record(out, a->requires_grad || b->requires_grad, [a, b, out]() {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i] * b->data[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) b->grad[i] += out->grad[i] * a->data[i];
    }
  });
}

TensorPtr Graph::relu(const TensorPtr& x) {
  auto out = zeros(x->shape);
  for (std::size_t i = 0; i < out->size(); ++i)
    out->data[i] = x->data[i] > real(0) ? x->data[i] : real(0);
  return record(out, x->requires_grad, [x, out]() {
    x->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i)
      if (x->data[i] > real(0)) x->grad[i] += out->grad[i];
  });
}

TensorPtr Graph::sigmoid(const TensorPtr& x) {
  auto out = zeros(x->shape);
  for (std::size_t i = 0; i < out->size(); ++i) {
    const real v = x->data[i];
    if (v >= real(0)) {
      out->data[i] = real(1) / (real(1) + std::exp(-v));
    } else {
      const real e = std::exp(v);
      out->data[i] = e / (real(1) + e);
    }
  }
  return record(out, x->requires_grad, [x, out]() {
    x->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) {
      const real y = out->data[i];
      x->grad[i] += out->grad[i] * y * (real(1) - y);
    }
  });
}

TensorPtr Graph::affine(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
  if (x->shape.size() != 2 || w->shape.size() != 2 || x->shape[1] != w->shape[0]) {
    throw std::invalid_argument("affine: shape mismatch " + shape_str(x->shape) + " vs " +
                                shape_str(w->shape));
  }
  if (b->shape.size() != 1 || b->shape[0] != w->shape[1]) {
    throw std::invalid_argument("affine: bias shape " + shape_str(b->shape) +
                                " does not match output width " + std::to_string(w->shape[1]));
  }
  const std::size_t n = x->shape[0], in = x->shape[1], outw = w->shape[1];
  auto out = zeros({n, outw});
  for (std::size_t i = 0; i < n; ++i) {
    real* orow = &out->data[i * outw];
    for (std::size_t j = 0; j < outw; ++j) orow[j] = b->data[j];
    for (std::size_t t = 0; t < in; ++t) {
      const real xv = x->data[i * in + t];
      if (xv == real(0)) continue;
      const real* wrow = &w->data[t * outw];
      for (std::size_t j = 0; j < outw; ++j) orow[j] += xv * wrow[j];
    }
  }
  const bool track = x->requires_grad || w->requires_grad || b->requires_grad;
  return record(out, track, [x, w, b, out, n, in, outw]() {
    if (x->requires_grad) {
      x->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < outw; ++j) {
          const real dv = out->grad[i * outw + j];
          if (dv == real(0)) continue;
          for (std::size_t t = 0; t < in; ++t) x->grad[i * in + t] += dv * w->data[t * outw + j];
        }
    }
    if (w->requires_grad) {
      w->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < in; ++t) {
          const real xv = x->data[i * in + t];
          if (xv == real(0)) continue;
          for (std::size_t j = 0; j < outw; ++j) w->grad[t * outw + j] += xv * out->grad[i * outw + j];
        }
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < outw; ++j) b->grad[j] += out->grad[i * outw + j];
    }
  });
}

TensorPtr Graph::concat(const std::vector<TensorPtr>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const std::size_t ndim = parts[0]->shape.size();
  if (ndim == 0 || ndim > 2 || axis >= ndim) {
    throw std::invalid_argument("concat: unsupported rank/axis");
  }
  Shape out_shape = parts[0]->shape;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p->shape.size() != ndim) throw std::invalid_argument("concat: rank mismatch");
    for (std::size_t d = 0; d < ndim; ++d) {
      if (d != axis && p->shape[d] != out_shape[d]) {
        throw std::invalid_argument("concat: shape mismatch " + shape_str(p->shape) + " vs " +
                                    shape_str(parts[0]->shape));
      }
    }
    out_shape[axis] += p->shape[axis];
  }
  auto out = zeros(out_shape);
  bool track = false;
  // rows/cols view: 1-D tensors behave as a single row (axis 0 concat of
  // 1-D tensors stacks end to end).
  if (ndim == 1) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      std::copy(p->data.begin(), p->data.end(), out->data.begin() + off);
      off += p->size();
      track = track || p->requires_grad;
    }
    auto parts_copy = parts;
    return record(out, track, [parts_copy, out]() {
      std::size_t off = 0;
      for (const auto& p : parts_copy) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += out->grad[off + i];
        }
        off += p->size();
      }
    });
  }
  const std::size_t out_cols = out_shape[1];
  if (axis == 0) {
    std::size_t row_off = 0;
    for (const auto& p : parts) {
      std::copy(p->data.begin(), p->data.end(), out->data.begin() + row_off * out_cols);
      row_off += p->shape[0];
      track = track || p->requires_grad;
    }
    auto parts_copy = parts;
    return record(out, track, [parts_copy, out, out_cols]() {
      std::size_t row_off = 0;
      for (const auto& p : parts_copy) {
        if (p->requires_grad) {
          p->ensure_grad();
          const std::size_t base = row_off * out_cols;
          for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += out->grad[base + i];
        }
        row_off += p->shape[0];
      }
    });
  }
  // axis == 1
  const std::size_t nrows = out_shape[0];
  std::size_t col_off = 0;
  for (const auto& p : parts) {
    const std::size_t pc = p->shape[1];
    for (std::size_t i = 0; i < nrows; ++i)
      std::copy(p->data.begin() + i * pc, p->data.begin() + (i + 1) * pc,
                out->data.begin() + i * out_cols + col_off);
    col_off += pc;
    track = track || p->requires_grad;
  }
  auto parts_copy = parts;
  return record(out, track, [parts_copy, out, nrows, out_cols]() {
    std::size_t col_off = 0;
    for (const auto& p : parts_copy) {
      const std::size_t pc = p->shape[1];
      if (p->requires_grad) {
        p->ensure_grad();
        for (std::size_t i = 0; i < nrows; ++i)
          for (std::size_t j = 0; j < pc; ++j)
            p->grad[i * pc + j] += out->grad[i * out_cols + col_off + j];
      }
      col_off += pc;
    }
  });
}

TensorPtr Graph::reshape(const TensorPtr& x, Shape shape) {
  if (shape_product(shape) != x->size()) {
    throw std::invalid_argument("reshape: size mismatch " + shape_str(x->shape) + " -> " +
                                shape_str(shape));
  }
  auto out = make_tensor(std::move(shape), x->data);
  return record(out, x->requires_grad, [x, out]() {
    x->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) x->grad[i] += out->grad[i];
  });
}

TensorPtr Graph::masked_softmax(const TensorPtr& logits, const TensorPtr& mask, std::size_t axis) {
  if (mask->shape.size() != 1) throw std::invalid_argument("masked_softmax: mask must be 1-D");
  require_binary_mask(*mask);
  const std::size_t ndim = logits->shape.size();
  if (ndim == 0 || ndim > 2 || axis >= ndim) {
    throw std::invalid_argument("masked_softmax: unsupported rank/axis");
  }
  if (mask->shape[0] != logits->shape[axis]) {
    throw std::invalid_argument("masked_softmax: mask length " + std::to_string(mask->shape[0]) +
                                " vs axis extent " + std::to_string(logits->shape[axis]));
  }
  // View the tensor as (slices × extent) where each slice is normalized
  // independently along `axis`. stride = step between consecutive entries
  // of one slice.
  const std::size_t extent = logits->shape[axis];
  std::size_t n_slices, stride, slice_step;
  if (ndim == 1) {
    n_slices = 1;
    stride = 1;
    slice_step = 0;
  } else if (axis == 1) {
    n_slices = logits->shape[0];
    stride = 1;
    slice_step = logits->shape[1];
  } else {
    n_slices = logits->shape[1];
    stride = logits->shape[1];
    slice_step = 1;
  }
  bool any_unmasked = false;
  for (std::size_t k = 0; k < extent; ++k) any_unmasked = any_unmasked || mask->data[k] == real(1);
  if (!any_unmasked) throw std::invalid_argument("masked_softmax: fully masked slice");

  auto out = zeros(logits->shape);
  for (std::size_t s = 0; s < n_slices; ++s) {
    const std::size_t base = s * slice_step;
    real mx = -std::numeric_limits<real>::infinity();
    for (std::size_t k = 0; k < extent; ++k)
      if (mask->data[k] == real(1)) mx = std::max(mx, logits->data[base + k * stride]);
    real sum = real(0);
    for (std::size_t k = 0; k < extent; ++k) {
      if (mask->data[k] == real(1)) {
        const real e = std::exp(logits->data[base + k * stride] - mx);
        out->data[base + k * stride] = e;
        sum += e;
      }
    }
    for (std::size_t k = 0; k < extent; ++k)
      if (mask->data[k] == real(1)) out->data[base + k * stride] /= sum;
  }
  return record(out, logits->requires_grad,
                [logits, mask, out, n_slices, extent, stride, slice_step]() {
    logits->ensure_grad();
    for (std::size_t s = 0; s < n_slices; ++s) {
      const std::size_t base = s * slice_step;
      real dot = real(0);
      for (std::size_t k = 0; k < extent; ++k) {
        const std::size_t idx = base + k * stride;
        dot += out->grad[idx] * out->data[idx];
      }
      for (std::size_t k = 0; k < extent; ++k) {
        if (mask->data[k] != real(1)) continue;
        const std::size_t idx = base + k * stride;
        logits->grad[idx] += out->data[idx] * (out->grad[idx] - dot);
      }
    }
  });
}

TensorPtr Graph::conv1d_same(const TensorPtr& x, const TensorPtr& kernel, const TensorPtr& bias) {
  if (x->shape.size() != 2) throw std::invalid_argument("conv1d_same: input must be {L, in}");
  if (kernel->shape.size() != 3 || kernel->shape[0] != 3) {
    throw std::invalid_argument("conv1d_same: kernel must be {3, in, out}, got " +
                                shape_str(kernel->shape));
  }
  if (kernel->shape[1] != x->shape[1]) {
    throw std::invalid_argument("conv1d_same: channel-count mismatch: input has " +
                                std::to_string(x->shape[1]) + " channels, kernel expects " +
                                std::to_string(kernel->shape[1]));
  }
  const std::size_t L = x->shape[0], cin = x->shape[1], cout = kernel->shape[2];
  if (bias->shape.size() != 1 || bias->shape[0] != cout) {
    throw std::invalid_argument("conv1d_same: bias shape " + shape_str(bias->shape));
  }
  auto out = zeros({L, cout});
  for (std::size_t t = 0; t < L; ++t) {
    real* orow = &out->data[t * cout];
    for (std::size_t j = 0; j < cout; ++j) orow[j] = bias->data[j];
    for (std::size_t w = 0; w < 3; ++w) {
      const std::size_t src = t + w;  // actual input index + 1 (zero pad)
      if (src < 1 || src > L) continue;
      const real* xrow = &x->data[(src - 1) * cin];
      const real* krow = &kernel->data[w * cin * cout];
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const real xv = xrow[ci];
        if (xv == real(0)) continue;
        const real* kk = &krow[ci * cout];
        for (std::size_t j = 0; j < cout; ++j) orow[j] += xv * kk[j];
      }
    }
  }
  const bool track = x->requires_grad || kernel->requires_grad || bias->requires_grad;
  return record(out, track, [x, kernel, bias, out, L, cin, cout]() {
    for (std::size_t t = 0; t < L; ++t) {
      const real* drow = &out->grad[t * cout];
      for (std::size_t w = 0; w < 3; ++w) {
        const std::size_t src = t + w;
        if (src < 1 || src > L) continue;
        const std::size_t xi = (src - 1) * cin;
        const std::size_t kbase = w * cin * cout;
        if (x->requires_grad) {
          x->ensure_grad();
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const real* kk = &kernel->data[kbase + ci * cout];
            real acc = real(0);
            for (std::size_t j = 0; j < cout; ++j) acc += kk[j] * drow[j];
            x->grad[xi + ci] += acc;
          }
        }
        if (kernel->requires_grad) {
          kernel->ensure_grad();
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const real xv = x->data[xi + ci];
            if (xv == real(0)) continue;
            real* kg = &kernel->grad[kbase + ci * cout];
            for (std::size_t j = 0; j < cout; ++j) kg[j] += xv * drow[j];
          }
        }
      }
      if (bias->requires_grad) {
        bias->ensure_grad();
        for (std::size_t j = 0; j < cout; ++j) bias->grad[j] += drow[j];
      }
    }
  });
}

TensorPtr Graph::dropout(const TensorPtr& x, double keep, bool training, Rng& rng) {
  if (keep <= 0.0 || keep > 1.0) {
    throw std::invalid_argument("dropout: keep probability must be in (0, 1], got " +
                                std::to_string(keep));
  }
  if (!training || keep == 1.0) {
    auto out = make_tensor(x->shape, x->data);
    return record(out, x->requires_grad, [x, out]() {
      x->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) x->grad[i] += out->grad[i];
    });
  }
  auto scale = std::make_shared<std::vector<real>>(x->size());
  const real inv = static_cast<real>(1.0 / keep);
  auto out = zeros(x->shape);
  for (std::size_t i = 0; i < x->size(); ++i) {
    (*scale)[i] = rng.keep(keep) ? inv : real(0);
    out->data[i] = x->data[i] * (*scale)[i];
  }
  return record(out, x->requires_grad, [x, out, scale]() {
    x->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) x->grad[i] += out->grad[i] * (*scale)[i];
  });
}

TensorPtr Graph::embedding_lookup(const TensorPtr& table, const std::vector<int>& ids) {
  if (table->shape.size() != 2) throw std::invalid_argument("embedding_lookup: table must be 2-D");
  const std::size_t v = table->shape[0], d = table->shape[1];
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw std::invalid_argument("embedding_lookup: id " + std::to_string(id) +
                                  " out of range for table with " + std::to_string(v) + " rows");
    }
  }
  auto out = zeros({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy(table->data.begin() + ids[i] * d, table->data.begin() + (ids[i] + 1) * d,
              out->data.begin() + i * d);
  auto ids_copy = ids;
  return record(out, table->requires_grad, [table, out, ids_copy, d]() {
    table->ensure_grad();
    for (std::size_t i = 0; i < ids_copy.size(); ++i) {
      real* trow = &table->grad[ids_copy[i] * d];
      const real* orow = &out->grad[i * d];
      for (std::size_t j = 0; j < d; ++j) trow[j] += orow[j];
    }
  });
}

TensorPtr Graph::zero_masked_rows(const TensorPtr& x, const TensorPtr& mask) {
  const std::size_t L = x->rows(), d = x->cols();
  if (mask->shape.size() != 1 || mask->shape[0] != L) {
    throw std::invalid_argument("zero_masked_rows: mask length mismatch");
  }
  require_binary_mask(*mask);
  auto out = zeros({L, d});
  for (std::size_t i = 0; i < L; ++i)
    if (mask->data[i] == real(1))
      std::copy(x->data.begin() + i * d, x->data.begin() + (i + 1) * d, out->data.begin() + i * d);
  return record(out, x->requires_grad, [x, mask, out, L, d]() {
    x->ensure_grad();
    for (std::size_t i = 0; i < L; ++i) {
      if (mask->data[i] != real(1)) continue;
      for (std::size_t j = 0; j < d; ++j) x->grad[i * d + j] += out->grad[i * d + j];
    }
  });
}

TensorPtr Graph::masked_max_pool(const TensorPtr& x, const TensorPtr& mask) {
  const std::size_t L = x->rows(), d = x->cols();
  if (mask->shape.size() != 1 || mask->shape[0] != L) {
    throw std::invalid_argument("masked_max_pool: mask length mismatch");
  }
  require_binary_mask(*mask);
  auto argmax = std::make_shared<std::vector<std::size_t>>(d, L);
  auto out = zeros({1, d});
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < L; ++i) {
      if (mask->data[i] != real(1)) continue;
      if ((*argmax)[j] == L || x->data[i * d + j] > out->data[j]) {
        out->data[j] = x->data[i * d + j];
        (*argmax)[j] = i;
      }
    }
    if ((*argmax)[j] == L) throw std::invalid_argument("masked_max_pool: fully masked input");
  }
  return record(out, x->requires_grad, [x, out, argmax, d]() {
    x->ensure_grad();
    for (std::size_t j = 0; j < d; ++j) x->grad[(*argmax)[j] * d + j] += out->grad[j];
  });
}

TensorPtr Graph::softmax_cross_entropy(const TensorPtr& logits, const std::vector<int>& labels) {
  if (logits->shape.size() != 2) throw std::invalid_argument("softmax_cross_entropy: logits must be 2-D");
  const std::size_t bsz = logits->shape[0], k = logits->shape[1];
  if (labels.size() != bsz) {
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(bsz) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
    }
  }
  auto probs = std::make_shared<std::vector<real>>(bsz * k);
  real total = real(0);
  for (std::size_t i = 0; i < bsz; ++i) {
    const real* row = &logits->data[i * k];
    real mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    real sum = real(0);
    for (std::size_t j = 0; j < k; ++j) {
      (*probs)[i * k + j] = std::exp(row[j] - mx);
      sum += (*probs)[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) (*probs)[i * k + j] /= sum;
    // -log p[label] via log-sum-exp, not via the normalized prob.
    total += std::log(sum) - (row[labels[i]] - mx);
  }
  auto out = make_tensor({1}, {total / static_cast<real>(bsz)});
  auto labels_copy = labels;
  return record(out, logits->requires_grad, [logits, out, probs, labels_copy, bsz, k]() {
    logits->ensure_grad();
    const real scale = out->grad[0] / static_cast<real>(bsz);
    for (std::size_t i = 0; i < bsz; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        const real onehot = (static_cast<std::size_t>(labels_copy[i]) == j) ? real(1) : real(0);
        logits->grad[i * k + j] += scale * ((*probs)[i * k + j] - onehot);
      }
  });
}

void Graph::backward(const TensorPtr& loss) {
  if (loss->size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss->shape));
  }
  loss->ensure_grad();
  loss->grad[0] = real(1);
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not on any path to the loss
    it->pull();
  }
}

}  // namespace coin
