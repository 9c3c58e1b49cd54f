#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "coin/tensor.hpp"
#include "test_util.hpp"

using namespace coin;
using testutil::naive_matmul;
using testutil::rel_err;

TEST_CASE("matmul identity leaves the right factor unchanged") {
  Graph g;
  auto eye = make_tensor({2, 2}, {1, 0, 0, 1});
  auto b = make_tensor({2, 2}, {3.5, -2, 0.25, 7});
  auto c = g.matmul(eye, b);
  for (std::size_t i = 0; i < 4; ++i) CHECK(c->data[i] == b->data[i]);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  Graph g;
  auto a = make_tensor({2, 2}, {1, 2, 3, 4});
  auto b = make_tensor({2, 2}, {5, 6, 7, 8});
  auto c = g.matmul(a, b);
  const auto expect = naive_matmul({1, 2, 3, 4}, {5, 6, 7, 8}, 2, 2, 2);
  CHECK(expect == std::vector<double>{19, 22, 43, 50});
  for (std::size_t i = 0; i < 4; ++i) CHECK(c->data[i] == doctest::Approx(expect[i]).epsilon(1e-15));

  Rng rng(7);
  auto ra = uniform_init({3, 4}, rng, -1, 1);
  auto rb = uniform_init({4, 2}, rng, -1, 1);
  Graph g2;
  auto rc = g2.matmul(ra, rb);
  std::vector<double> da(ra->data.begin(), ra->data.end());
  std::vector<double> db(rb->data.begin(), rb->data.end());
  const auto oracle = naive_matmul(da, db, 3, 4, 2);
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    CHECK(static_cast<double>(rc->data[i]) == doctest::Approx(oracle[i]).epsilon(1e-12));
  }
}

TEST_CASE("matmul rejects mismatched inner dimensions naming both shapes") {
  Graph g;
  auto a = zeros({2, 3});
  auto b = zeros({2, 3});
  CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("2x3"), std::invalid_argument);
}

TEST_CASE("matmul gradients match finite differences") {
  Rng rng(11);
  auto a = uniform_init({3, 4}, rng, -1, 1);
  auto b = uniform_init({4, 2}, rng, -1, 1);
  auto loss_fn = [&]() {
    Graph g;
    auto c = g.matmul(a, b);
    // deterministic scalar readout: sum of squares
    auto sq = g.hadamard(c, c);
    auto flat = g.reshape(sq, {1, sq->size()});
    auto ones = full({sq->size(), 1}, 1.0);
    return static_cast<double>(g.matmul(flat, ones)->data[0]);
  };
  Graph g;
  auto c = g.matmul(a, b);
  auto sq = g.hadamard(c, c);
  auto flat = g.reshape(sq, {1, sq->size()});
  auto ones = full({sq->size(), 1}, 1.0);
  auto loss = g.reshape(g.matmul(flat, ones), {1});
  a->zero_grad();
  b->zero_grad();
  g.backward(loss);
  CHECK(testutil::max_grad_err({a, b}, loss_fn) < 1e-6);
}

TEST_CASE("masked_softmax base cases") {
  Graph g;
  auto one_mask = make_tensor({2}, {1, 1});
  auto s1 = g.masked_softmax(make_tensor({2}, {0, 0}), one_mask, 0);
  CHECK(s1->data[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s1->data[1] == doctest::Approx(0.5).epsilon(1e-15));

  auto s2 = g.masked_softmax(make_tensor({3}, {0, 0, 7}), make_tensor({3}, {1, 1, 0}), 0);
  CHECK(s2->data[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s2->data[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s2->data[2] == 0.0);

  // hand evaluation: exp(ln 2) = 2, exp(0) = 1, so weights are 2/3 and 1/3
  auto s3 = g.masked_softmax(make_tensor({2}, {static_cast<real>(std::log(2.0)), 0}), one_mask, 0);
  CHECK(static_cast<double>(s3->data[0]) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(static_cast<double>(s3->data[1]) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("masked_softmax properties on random 2-D inputs") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    auto logits = uniform_init({4, 5}, rng, -8, 8);
    logits->requires_grad = false;
    std::vector<real> mv(5);
    std::size_t kept = 0;
    for (auto& m : mv) {
      m = rng.keep(0.7) ? 1 : 0;
      kept += m == 1 ? 1 : 0;
    }
    if (kept == 0) mv[0] = 1;
    auto mask = make_tensor({5}, mv);
    Graph g;
    auto out = g.masked_softmax(logits, mask, 1);
    for (std::size_t i = 0; i < 4; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < 5; ++j) {
        const double v = out->at(i, j);
        CHECK(v >= 0.0);
        if (mv[j] == 0) CHECK(v == 0.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("masked_softmax rejects a fully masked slice") {
  Graph g;
  CHECK_THROWS_AS(g.masked_softmax(make_tensor({2}, {1, 2}), make_tensor({2}, {0, 0}), 0),
                  std::invalid_argument);
}

TEST_CASE("masked_softmax gradient matches finite differences") {
  Rng rng(29);
  auto logits = uniform_init({3, 4}, rng, -2, 2);
  auto mask = make_tensor({4}, {1, 1, 0, 1});
  auto weight = uniform_init({3, 4}, rng, -1, 1);
  weight->requires_grad = false;
  auto loss_fn = [&]() {
    Graph g;
    auto out = g.hadamard(g.masked_softmax(logits, mask, 1), weight);
    auto flat = g.reshape(out, {1, 12});
    auto ones = full({12, 1}, 1.0);
    return static_cast<double>(g.matmul(flat, ones)->data[0]);
  };
  Graph g;
  auto out = g.hadamard(g.masked_softmax(logits, mask, 1), weight);
  auto flat = g.reshape(out, {1, 12});
  auto ones = full({12, 1}, 1.0);
  auto loss = g.reshape(g.matmul(flat, ones), {1});
  logits->zero_grad();
  g.backward(loss);
  CHECK(testutil::max_grad_err({logits}, loss_fn) < 1e-6);
}

TEST_CASE("conv1d_same zero and identity kernels") {
  Graph g;
  Rng rng(31);
  auto x = uniform_init({4, 3}, rng, -1, 1);
  x->requires_grad = false;

  auto zk = zeros({3, 3, 3});
  auto zb = zeros({3});
  auto out = g.conv1d_same(x, zk, zb);
  for (real v : out->data) CHECK(v == 0.0);

  // center tap = identity, end taps = 0
  auto ik = zeros({3, 3, 3});
  for (std::size_t c = 0; c < 3; ++c) ik->data[(1 * 3 + c) * 3 + c] = 1.0;
  auto out2 = g.conv1d_same(x, ik, zb);
  for (std::size_t i = 0; i < x->size(); ++i) CHECK(out2->data[i] == x->data[i]);
}

TEST_CASE("conv1d_same matches the sliding-window oracle") {
  // X = [1,2,3], K = [1,1,1]: window sums with zero padding are [3,6,5]
  Graph g;
  auto x = make_tensor({3, 1}, {1, 2, 3});
  auto k = make_tensor({3, 1, 1}, {1, 1, 1});
  auto b = zeros({1});
  auto out = g.conv1d_same(x, k, b);
  std::vector<double> oracle(3, 0.0);
  const std::vector<double> padded = {0, 1, 2, 3, 0};
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t w = 0; w < 3; ++w) oracle[t] += padded[t + w];
  CHECK(oracle == std::vector<double>{3, 6, 5});
  for (std::size_t t = 0; t < 3; ++t) CHECK(out->data[t] == doctest::Approx(oracle[t]));
}

TEST_CASE("conv1d_same locality: a point perturbation moves outputs only within one step") {
  Rng rng(37);
  auto x = uniform_init({6, 2}, rng, -1, 1);
  auto k = uniform_init({3, 2, 2}, rng, -1, 1);
  auto b = uniform_init({2}, rng, -1, 1);
  Graph g;
  auto base = g.conv1d_same(x, k, b);
  const std::size_t t = 3;
  x->data[t * 2 + 1] += real(0.5);
  Graph g2;
  auto moved = g2.conv1d_same(x, k, b);
  for (std::size_t pos = 0; pos < 6; ++pos) {
    for (std::size_t c = 0; c < 2; ++c) {
      const bool may_change = pos + 1 >= t && pos <= t + 1;
      if (!may_change) CHECK(moved->at(pos, c) == base->at(pos, c));
    }
  }
}

TEST_CASE("conv1d_same rejects a channel-count mismatch") {
  Graph g;
  auto x = zeros({4, 3});
  auto k = zeros({3, 2, 5});
  auto b = zeros({5});
  CHECK_THROWS_WITH_AS(g.conv1d_same(x, k, b), doctest::Contains("channel-count mismatch"),
                       std::invalid_argument);
}

TEST_CASE("conv1d_same gradients match finite differences") {
  Rng rng(41);
  auto x = uniform_init({5, 2}, rng, -1, 1);
  auto k = uniform_init({3, 2, 3}, rng, -1, 1);
  auto b = uniform_init({3}, rng, -1, 1);
  auto loss_fn = [&]() {
    Graph g;
    auto out = g.relu(g.conv1d_same(x, k, b));
    auto flat = g.reshape(out, {1, out->size()});
    auto ones = full({out->size(), 1}, 1.0);
    return static_cast<double>(g.matmul(flat, ones)->data[0]);
  };
  Graph g;
  auto out = g.relu(g.conv1d_same(x, k, b));
  auto flat = g.reshape(out, {1, out->size()});
  auto ones = full({out->size(), 1}, 1.0);
  auto loss = g.reshape(g.matmul(flat, ones), {1});
  x->zero_grad();
  k->zero_grad();
  b->zero_grad();
  g.backward(loss);
  CHECK(testutil::max_grad_err({x, k, b}, loss_fn) < 1e-5);
}

TEST_CASE("elementwise suite definitions") {
  Graph g;
  auto s = g.sigmoid(make_tensor({1}, {0}));
  CHECK(s->data[0] == 0.5);

  auto r = g.relu(make_tensor({2}, {-2, 3}));
  CHECK(r->data[0] == 0.0);
  CHECK(r->data[1] == 3.0);

  auto h = g.hadamard(make_tensor({2}, {1, 2}), make_tensor({2}, {3, 4}));
  CHECK(h->data[0] == 3.0);
  CHECK(h->data[1] == 8.0);

  CHECK_THROWS_AS(g.add(zeros({2}), zeros({3})), std::invalid_argument);
  CHECK_THROWS_AS(g.hadamard(zeros({2, 2}), zeros({4})), std::invalid_argument);
}

TEST_CASE("affine applies bias per row") {
  Graph g;
  auto x = make_tensor({2, 2}, {1, 0, 0, 1});
  auto w = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = make_tensor({3}, {10, 20, 30});
  auto y = g.affine(x, w, b);
  CHECK(y->at(0, 0) == 11.0);
  CHECK(y->at(0, 1) == 22.0);
  CHECK(y->at(0, 2) == 33.0);
  CHECK(y->at(1, 0) == 14.0);
  CHECK(y->at(1, 1) == 25.0);
  CHECK(y->at(1, 2) == 36.0);
}

TEST_CASE("concat both axes and gradient routing") {
  Graph g;
  auto a = make_tensor({1, 2}, {1, 2}, true);
  auto b = make_tensor({1, 2}, {3, 4}, true);
  auto wide = g.concat({a, b}, 1);
  CHECK(wide->shape == Shape{1, 4});
  CHECK(wide->data == std::vector<real>{1, 2, 3, 4});
  auto tall = g.concat({a, b}, 0);
  CHECK(tall->shape == Shape{2, 2});

  auto ones = full({4, 1}, 1.0);
  auto loss = g.reshape(g.matmul(wide, ones), {1});
  a->zero_grad();
  b->zero_grad();
  g.backward(loss);
  CHECK(a->grad == std::vector<real>{1, 1});
  CHECK(b->grad == std::vector<real>{1, 1});
}

TEST_CASE("dropout contracts") {
  Rng rng(43);
  auto x = full({8}, 1.0);

  Graph g;
  auto same1 = g.dropout(x, 1.0, true, rng);
  CHECK(same1->data == x->data);
  auto same2 = g.dropout(x, 0.8, false, rng);
  CHECK(same2->data == x->data);
  CHECK_THROWS_AS(g.dropout(x, 0.0, true, rng), std::invalid_argument);
  CHECK_THROWS_AS(g.dropout(x, -0.2, true, rng), std::invalid_argument);
}

TEST_CASE("dropout Monte-Carlo expectation at keep=0.8") {
  Rng rng(47);
  auto x = full({1}, 1.0);
  double sum = 0;
  const int n = 100000;
  Graph g;
  for (int i = 0; i < n; ++i) {
    sum += static_cast<double>(g.dropout(x, 0.8, true, rng)->data[0]);
  }
  CHECK(std::abs(sum / n - 1.0) < 0.01);
}

TEST_CASE("dropout identical seeds produce identical masks") {
  auto x = full({64}, 2.0);
  Rng r1(99), r2(99);
  Graph g1, g2;
  auto a = g1.dropout(x, 0.5, true, r1);
  auto b = g2.dropout(x, 0.5, true, r2);
  CHECK(a->data == b->data);
}

TEST_CASE("backward analytic cases") {
  // d(x^2)/dx = 2x = 6 at x=3
  auto x = make_tensor({1}, {3}, true);
  Graph g;
  auto loss = g.hadamard(x, x);
  x->zero_grad();
  g.backward(loss);
  CHECK(x->grad[0] == doctest::Approx(6.0).epsilon(1e-15));

  // d sigmoid(0)/dx = 0.25
  auto y = make_tensor({1}, {0}, true);
  Graph g2;
  auto s = g2.sigmoid(y);
  y->zero_grad();
  g2.backward(s);
  CHECK(y->grad[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("backward rejects a non-scalar loss") {
  auto x = make_tensor({2}, {1, 2}, true);
  Graph g;
  auto y = g.relu(x);
  CHECK_THROWS_AS(g.backward(y), std::invalid_argument);
}

TEST_CASE("parameters off the loss path keep zero gradients") {
  auto x = make_tensor({1}, {2}, true);
  auto unused = make_tensor({1}, {5}, true);
  Graph g;
  auto loss = g.hadamard(x, x);
  x->zero_grad();
  unused->zero_grad();
  g.relu(unused);  // recorded but disconnected from the loss
  g.backward(loss);
  CHECK(unused->grad[0] == 0.0);
  CHECK(x->grad[0] == doctest::Approx(4.0));
}

TEST_CASE("composite expression gradient property on random inputs") {
  Rng rng(53);
  auto a = uniform_init({3, 3}, rng, -1, 1);
  auto b = uniform_init({3, 3}, rng, -1, 1);
  auto w = uniform_init({3, 2}, rng, -1, 1);
  auto bias = uniform_init({2}, rng, -1, 1);
  auto mask = make_tensor({3}, {1, 1, 1});
  auto build = [&](Graph& g) {
    auto mix = g.add(g.relu(g.matmul(a, b)), g.sigmoid(g.sub(a, b)));
    auto soft = g.masked_softmax(mix, mask, 1);
    auto y = g.affine(g.hadamard(soft, a), w, bias);
    auto flat = g.reshape(y, {1, y->size()});
    auto ones = full({y->size(), 1}, 1.0);
    return g.reshape(g.matmul(flat, ones), {1});
  };
  auto loss_fn = [&]() {
    Graph g;
    return static_cast<double>(build(g)->data[0]);
  };
  Graph g;
  auto loss = build(g);
  for (auto& p : {a, b, w, bias}) p->zero_grad();
  g.backward(loss);
  CHECK(testutil::max_grad_err({a, b, w, bias}, loss_fn) < 1e-4);
}

TEST_CASE("identical inputs and seeds give bit-identical op outputs") {
  Rng ra(1234), rb(1234);
  auto xa = uniform_init({4, 4}, ra, -1, 1);
  auto xb = uniform_init({4, 4}, rb, -1, 1);
  CHECK(xa->data == xb->data);
  Graph g1, g2;
  auto y1 = g1.sigmoid(g1.matmul(xa, g1.transpose(xa)));
  auto y2 = g2.sigmoid(g2.matmul(xb, g2.transpose(xb)));
  CHECK(y1->data == y2->data);
}

TEST_CASE("embedding lookup copies rows and scatters gradients") {
  auto table = make_tensor({3, 2}, {0, 0, 10, 11, 20, 21}, true);
  Graph g;
  auto rows = g.embedding_lookup(table, {2, 1, 2});
  CHECK(rows->shape == Shape{3, 2});
  CHECK(rows->data == std::vector<real>{20, 21, 10, 11, 20, 21});
  auto ones = full({2, 1}, 1.0);
  auto col = g.matmul(rows, ones);           // {3,1}
  auto total = g.matmul(g.transpose(col), full({3, 1}, 1.0));
  table->zero_grad();
  g.backward(g.reshape(total, {1}));
  CHECK(table->grad == std::vector<real>{0, 0, 1, 1, 2, 2});
  CHECK_THROWS_AS(g.embedding_lookup(table, {3}), std::invalid_argument);
}

TEST_CASE("zero_masked_rows and masked_max_pool") {
  auto x = make_tensor({3, 2}, {1, -5, 2, 9, 7, -1}, true);
  auto mask = make_tensor({3}, {1, 0, 1});
  Graph g;
  auto z = g.zero_masked_rows(x, mask);
  CHECK(z->data == std::vector<real>{1, -5, 0, 0, 7, -1});
  auto mx = g.masked_max_pool(x, mask);
  CHECK(mx->shape == Shape{1, 2});
  CHECK(mx->data[0] == 7.0);   // row 1 (value 2 and 9) is masked out
  CHECK(mx->data[1] == -1.0);
  x->zero_grad();
  g.backward(g.reshape(g.matmul(mx, full({2, 1}, 1.0)), {1}));
  CHECK(x->grad == std::vector<real>{0, 0, 0, 0, 1, 1});
}
