#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "coin/tensor.hpp"

namespace coin::testutil {

// Triple-loop reference product, kept independent of Graph::matmul.
inline std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                        std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < k; ++t) c[i * n + j] += a[i * k + t] * b[t * n + j];
  return c;
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central finite differences of `loss` w.r.t. every entry of `param`.
// `loss` must rebuild its graph from current parameter values on each call.
inline std::vector<double> finite_diff(const coin::TensorPtr& param,
                                       const std::function<double()>& loss, double h = 1e-5) {
  std::vector<double> grads(param->size());
  for (std::size_t i = 0; i < param->size(); ++i) {
    const coin::real saved = param->data[i];
    param->data[i] = saved + static_cast<coin::real>(h);
    const double up = loss();
    param->data[i] = saved - static_cast<coin::real>(h);
    const double down = loss();
    param->data[i] = saved;
    grads[i] = (up - down) / (2.0 * h);
  }
  return grads;
}

// Max relative disagreement between autodiff grads and finite differences.
inline double max_grad_err(const std::vector<coin::TensorPtr>& params,
                           const std::function<double()>& loss, double h = 1e-5) {
  double worst = 0.0;
  for (const auto& p : params) {
    p->ensure_grad();
    const auto fd = finite_diff(p, loss, h);
    for (std::size_t i = 0; i < p->size(); ++i) {
      worst = std::max(worst, rel_err(static_cast<double>(p->grad[i]), fd[i]));
    }
  }
  return worst;
}

}  // namespace coin::testutil
