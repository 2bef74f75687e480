#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>

#include "appealnet/rng.hpp"
#include "appealnet/tensor.hpp"

using namespace appealnet;

namespace {

TensorPtr random_tensor(Rng& rng, std::vector<std::size_t> shape,
                        double lo = -2.0, double hi = 2.0) {
  auto t = Tensor::zeros(std::move(shape));
  for (auto& v : t->values) v = rng.uniform(lo, hi);
  return t;
}

// test-local central difference, independent of grad_check
double fd_slope(const std::function<double()>& f, double& x, double eps) {
  double saved = x;
  x = saved + eps;
  double lp = f();
  x = saved - eps;
  double lm = f();
  x = saved;
  return (lp - lm) / (2.0 * eps);
}

}  // namespace

TEST_CASE("dense forward values") {
  Graph g;
  auto x = Tensor::from({1, 2}, {1.0, 0.0});
  auto w = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 1.0});
  auto b = Tensor::from({2}, {0.0, 0.0});
  auto y = g.dense(x, w, b);
  CHECK(y->values == std::vector<double>{1.0, 0.0});

  auto x2 = Tensor::from({1, 2}, {1.0, 2.0});
  auto w2 = Tensor::from({2, 1}, {1.0, 1.0});
  auto b2 = Tensor::from({1}, {3.0});
  auto y2 = g.dense(x2, w2, b2);
  CHECK(y2->values[0] == doctest::Approx(6.0));
}

TEST_CASE("dense shape mismatch names both shapes") {
  Graph g;
  auto x = Tensor::from({2, 3}, std::vector<double>(6, 1.0));
  auto w = Tensor::from({4, 5}, std::vector<double>(20, 1.0));
  auto b = Tensor::from({5}, std::vector<double>(5, 0.0));
  try {
    g.dense(x, w, b);
    FAIL("expected dimension error");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x5") != std::string::npos);
  }
}

TEST_CASE("activation values") {
  Graph g;
  auto z = Tensor::from({1, 1}, {0.0});
  CHECK(g.sigmoid(z)->values[0] == 0.5);

  auto t = Tensor::from({1, 3}, {1.0, 1.0, 1.0});
  auto s = g.softmax(t);
  for (double v : s->values) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  auto big = Tensor::from({1, 2}, {1000.0, 0.0});
  auto sb = g.softmax(big);
  CHECK(std::isfinite(sb->values[0]));
  CHECK(sb->values[0] == doctest::Approx(1.0));
  CHECK(sb->values[1] == doctest::Approx(0.0));
}

TEST_CASE("softmax shift invariance and row sums") {
  Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 1 + rng.index(4), k = 2 + rng.index(6);
    Graph g;
    auto t = random_tensor(rng, {n, k}, -30.0, 30.0);
    auto shifted = Tensor::zeros({n, k});
    double c = rng.uniform(-100.0, 100.0);
    for (std::size_t i = 0; i < t->size(); ++i) {
      shifted->values[i] = t->values[i] + c;
    }
    auto a = g.softmax(t);
    auto b = g.softmax(shifted);
    for (std::size_t r = 0; r < n; ++r) {
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j) sum += a->values[r * k + j];
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
    for (std::size_t i = 0; i < t->size(); ++i) {
      CHECK(std::abs(a->values[i] - b->values[i]) <= 1e-12);
    }
  }
}

TEST_CASE("softmax contract violations") {
  Graph g;
  auto one_col = Tensor::from({2, 1}, {1.0, 2.0});
  CHECK_THROWS_AS(g.softmax(one_col), std::invalid_argument);
  auto bad = Tensor::from({1, 2}, {1.0, std::nan("")});
  CHECK_THROWS_AS(g.softmax(bad), std::runtime_error);
}

TEST_CASE("backward of sum(W x) has outer-product structure") {
  Graph g;
  auto x = Tensor::from({2, 3}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  auto w = Tensor::from({3, 2}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  auto b = Tensor::from({2}, {0.0, 0.0});
  auto loss = g.sum(g.dense(x, w, b));
  g.backward(loss);
  // d loss / d w[i][j] = sum over batch of x[b][i]
  for (std::size_t i = 0; i < 3; ++i) {
    double col_sum = x->values[i] + x->values[3 + i];
    CHECK(w->grad[i * 2 + 0] == doctest::Approx(col_sum));
    CHECK(w->grad[i * 2 + 1] == doctest::Approx(col_sum));
  }
  CHECK(b->grad == std::vector<double>{2.0, 2.0});
}

TEST_CASE("constant loss leaves all grads zero") {
  Graph g;
  auto x = Tensor::from({1, 2}, {1.0, 2.0});
  auto w = Tensor::from({2, 1}, {3.0, 4.0});
  auto b = Tensor::from({1}, {0.5});
  auto loss = g.affine(g.sum(g.dense(x, w, b)), 0.0, 5.0);
  g.backward(loss);
  CHECK(loss->values[0] == 5.0);
  for (double v : w->grad) CHECK(v == 0.0);
  for (double v : b->grad) CHECK(v == 0.0);
}

TEST_CASE("sigmoid(w) * c at w=0 has slope c/4") {
  const double c = 3.0;
  auto w = Tensor::from({1, 1}, {0.0});
  auto build = [&](Graph& g) { return g.affine(g.sum(g.sigmoid(w)), c, 0.0); };
  {
    Graph g;
    g.backward(build(g));
  }
  CHECK(w->grad[0] == doctest::Approx(0.25 * c).epsilon(1e-12));
  double fd = fd_slope([&]() { Graph g; return build(g)->values[0]; },
                       w->values[0], 1e-6);
  CHECK(w->grad[0] == doctest::Approx(fd).epsilon(1e-7));
}

TEST_CASE("backward requires a scalar loss") {
  Graph g;
  auto t = Tensor::from({1, 2}, {1.0, 2.0});
  auto y = g.relu(t);
  CHECK_THROWS_AS(g.backward(y), std::invalid_argument);
}

TEST_CASE("repeated backward accumulates grads") {
  auto w = Tensor::from({2, 1}, {1.0, 2.0});
  auto x = Tensor::from({1, 2}, {3.0, 4.0});
  auto b = Tensor::from({1}, {0.0});
  Graph g;
  auto loss = g.sum(g.dense(x, w, b));
  g.backward(loss);
  auto once = w->grad;
  g.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(w->grad[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-15));
  }
  w->zero_grad();
  g.backward(loss);
  CHECK(w->grad == once);
}

TEST_CASE("backward is bit-deterministic") {
  Rng rng(5);
  auto x = random_tensor(rng, {4, 5});
  auto w1 = random_tensor(rng, {5, 6});
  auto b1 = random_tensor(rng, {6});
  auto w2 = random_tensor(rng, {6, 3});
  auto b2 = random_tensor(rng, {3});
  std::vector<TensorPtr> params{w1, b1, w2, b2};

  auto run = [&]() {
    zero_grads(params);
    Graph g;
    auto h = g.relu(g.dense(x, w1, b1));
    auto loss = g.mean(g.softmax(g.dense(h, w2, b2)));
    g.backward(loss);
    std::vector<double> flat;
    for (auto& p : params) flat.insert(flat.end(), p->grad.begin(), p->grad.end());
    return flat;
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("every primitive matches central differences over random shapes") {
  Rng rng(99);
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    std::size_t n = 1 + rng.index(3);
    std::size_t in = 2 + rng.index(5);
    std::size_t out = 2 + rng.index(5);
    auto x = random_tensor(rng, {n, in}, -1.5, 1.5);
    auto w = random_tensor(rng, {in, out}, -1.0, 1.0);
    auto b = random_tensor(rng, {out}, -1.0, 1.0);
    auto v = random_tensor(rng, {n, out}, 0.5, 2.0);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = rng.index(out);
    int which = trial % 6;
    auto build = [&](Graph& g) -> TensorPtr {
      auto base = g.dense(x, w, b);
      switch (which) {
        case 0: return g.mean(g.relu(base));
        case 1: return g.mean(g.sigmoid(base));
        case 2: return g.mean(g.pick(g.softmax(base), idx));
        case 3: return g.mean(g.log_clamped(g.sigmoid(base), 1e-7));
        case 4: return g.sum(g.mul(g.affine(base, 0.7, 0.1), v));
        default: return g.mean(g.row_sum(g.mul(base, base)));
      }
    };
    std::vector<TensorPtr> params{x, w, b};
    double err = grad_check(params, build, 1e-5);
    CHECK(err <= 1e-4);
    ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("grad_check on a linear model is near exact") {
  auto w = Tensor::from({3, 1}, {0.5, -1.0, 2.0});
  auto b = Tensor::from({1}, {0.25});
  auto x = Tensor::from({2, 3}, {1.0, 2.0, 3.0, -1.0, 0.5, 2.0});
  std::vector<TensorPtr> params{w, b};
  double err = grad_check(
      params, [&](Graph& g) { return g.sum(g.dense(x, w, b)); }, 1e-5);
  CHECK(err <= 1e-10);
}

TEST_CASE("grad_check epsilon domain") {
  auto w = Tensor::from({1, 1}, {1.0});
  auto build = [&](Graph& g) { return g.sum(g.relu(w)); };
  std::vector<TensorPtr> params{w};
  CHECK_THROWS_AS(grad_check(params, build, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(grad_check(params, build, 1e-9), std::invalid_argument);
  CHECK_NOTHROW(grad_check(params, build, 1e-4));
}
