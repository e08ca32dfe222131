#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "natsel/autodiff.hpp"
#include "natsel/error.hpp"
#include "natsel/loss.hpp"
#include "test_support.hpp"

using namespace natsel;
using natsel::testing::max_fd_error;
using natsel::testing::random_tensor;

namespace {

// Builds root = f(params) on a fresh tape and returns (value, grads).
using Graph = std::function<Var(Tape&, const std::vector<Var>&)>;

std::vector<Tensor> grads_of(const Graph& g, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& p : params) vars.push_back(tape.parameter(p));
  return tape.backward(g(tape, vars));
}

double value_of(const Graph& g, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& p : params) vars.push_back(tape.parameter(p));
  return g(tape, vars).value().item();
}

double fd_check(const Graph& g, const std::vector<Tensor>& params) {
  return max_fd_error(params, grads_of(g, params), [&](const std::vector<Tensor>& p) { return value_of(g, p); });
}

}  // namespace

TEST_CASE("backward examples") {
  const Tensor p = Tensor::vector({1, 2});
  const auto g1 = grads_of([](Tape&, const std::vector<Var>& v) { return sum(v[0]); }, {Tensor({2, 3}, 0.5)});
  CHECK(g1[0] == Tensor({2, 3}, 1.0));
  const auto g2 = grads_of([](Tape&, const std::vector<Var>& v) { return sum(mul(v[0], v[0])); }, {p});
  CHECK(g2[0] == Tensor::vector({2, 4}));
}

TEST_CASE("backward errors") {
  Tape tape;
  const Var p = tape.parameter(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(tape.backward(p), ShapeError);
  Tape other;
  const Var q = other.parameter(Tensor::scalar(1.0));
  CHECK_THROWS_AS(tape.backward(sum(q)), std::invalid_argument);
  CHECK_THROWS_AS(tape.backward(Var{}), std::invalid_argument);
}

TEST_CASE("unreached parameters get zero gradients of their own shape") {
  Tape tape;
  const Var a = tape.parameter(Tensor::vector({1, 2, 3}));
  const Var unused = tape.parameter(Tensor({2, 2}, 7.0));
  const auto g = tape.backward(sum(a));
  REQUIRE(g.size() == 2);
  CHECK(g[1] == Tensor({2, 2}, 0.0));
  (void)unused;
}

TEST_CASE("constants receive no gradient and parameters are reported in registration order") {
  Tape tape;
  const Var c = tape.constant(Tensor::vector({3, 4}));
  const Var b = tape.parameter(Tensor::vector({5, 6}));
  const Var a = tape.parameter(Tensor::vector({1, 2}));
  const auto g = tape.backward(sum(mul(add(a, c), b)));
  REQUIRE(g.size() == 2);
  CHECK(g[0] == Tensor::vector({4, 6}));  // d/db = a + c
  CHECK(g[1] == Tensor::vector({5, 6}));  // d/da = b
}

TEST_CASE("repeated use accumulates adjoints") {
  const auto g = grads_of(
      [](Tape&, const std::vector<Var>& v) { return add(sum(v[0]), add(sum(v[0]), sum(scale(v[0], 3.0)))); },
      {Tensor::vector({1, -1})});
  CHECK(g[0] == Tensor::vector({5, 5}));
}

TEST_CASE("pullbacks run in exact reverse order of recording") {
  Tape tape;
  std::vector<int> visited;
  const Var x = tape.parameter(Tensor::scalar(1.0));
  Var cur = x;
  for (int i = 0; i < 5; ++i) {
    cur = tape.record(cur.value(), {cur}, [i, &visited](const Tensor& up, std::span<const char>) {
      visited.push_back(i);
      return std::vector<Tensor>{up};
    });
  }
  const auto g = tape.backward(cur);
  CHECK(g[0].item() == 1.0);
  CHECK(visited == std::vector<int>{4, 3, 2, 1, 0});
}

TEST_CASE("every taped op matches central finite differences") {
  Rng rng(101);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor b = random_tensor({4, 2}, rng);
    const Tensor c = random_tensor({3, 4}, rng);
    const Tensor pos = random_tensor({3, 4}, rng, 0.5, 2.0);
    const Tensor bias = random_tensor({2}, rng);

    CHECK(fd_check([](Tape&, const std::vector<Var>& v) { return sum(matmul(v[0], v[1])); }, {a, b}) <= 1e-5);
    CHECK(fd_check([](Tape&, const std::vector<Var>& v) { return sum(mul(add(v[0], v[1]), sub(v[0], v[1]))); },
                   {a, c}) <= 1e-5);
    CHECK(fd_check([](Tape&, const std::vector<Var>& v) { return mean(mul(exp(v[0]), v[0])); }, {a}) <= 1e-5);
    CHECK(fd_check([](Tape&, const std::vector<Var>& v) { return sum(mul(log(v[0]), v[0])); }, {pos}) <= 1e-5);
    CHECK(fd_check([](Tape&, const std::vector<Var>& v) { return sum(mul(relu(v[0]), v[0])); }, {a}) <= 1e-5);
    CHECK(fd_check([](Tape&, const std::vector<Var>& v) { return sum(add_scalar(scale(mul(v[0], v[0]), -1.5), 2.0)); },
                   {a}) <= 1e-5);
    CHECK(fd_check(
              [](Tape&, const std::vector<Var>& v) {
                const Var y = linear(v[0], v[1], v[2]);
                return sum(mul(y, y));
              },
              {a, b, bias}) <= 1e-5);
    CHECK(fd_check(
              [](Tape&, const std::vector<Var>& v) {
                const Var r = reshape(v[0], {4, 3});
                return sum(mul(r, r));
              },
              {a}) <= 1e-5);
    // Scalar broadcasting in both operand positions.
    CHECK(fd_check([](Tape&, const std::vector<Var>& v) { return sum(mul(v[1], mul(v[0], v[0]))); },
                   {a, Tensor::scalar(0.7)}) <= 1e-5);
  }
}

TEST_CASE("im2col and softmax loss rows match finite differences") {
  Rng rng(202);
  const Tensor x = random_tensor({2, 4, 4, 2}, rng);
  const Tensor w = random_tensor({8, 3}, rng);
  CHECK(fd_check(
            [](Tape&, const std::vector<Var>& v) {
              const Var cols = im2col(v[0], 2);
              const Var y = matmul(cols, v[1]);
              return sum(mul(y, y));
            },
            {x, w}) <= 1e-5);

  const std::vector<int> labels{2, 0, 1};
  for (const LossKind kind : {LossKind::cross_entropy, LossKind::focal, LossKind::label_smoothing}) {
    LossConfig cfg;
    cfg.kind = kind;
    const Tensor z = random_tensor({3, 4}, rng, -2.0, 2.0);
    CHECK(fd_check([&](Tape&, const std::vector<Var>& v) { return sum(softmax_loss_rows(v[0], labels, cfg)); }, {z}) <=
          1e-5);
  }
}

TEST_CASE("softmax_loss_rows values equal per_sample_loss") {
  Rng rng(4);
  const Tensor z = random_tensor({5, 3}, rng, -3.0, 3.0);
  const std::vector<int> labels{0, 1, 2, 1, 0};
  Tape tape;
  const Var losses = softmax_loss_rows(tape.constant(z), labels, LossConfig{});
  const Tensor p = softmax(z);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(losses.value()[i] == per_sample_loss(select(p, i), labels[i], LossConfig{}));
  }
  CHECK_THROWS(softmax_loss_rows(tape.constant(z), std::vector<int>{0, 1}, LossConfig{}));
}

TEST_CASE("backward is linear in the root") {
  Rng rng(303);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor a = random_tensor({3, 3}, rng);
    const Tensor b = random_tensor({3, 2}, rng);
    const double alpha = 1.7, beta = -0.3;
    auto l1 = [](const std::vector<Var>& v) { return sum(relu(matmul(v[0], v[1]))); };
    auto l2 = [](const std::vector<Var>& v) { return mean(exp(scale(matmul(v[0], v[1]), 0.5))); };
    const auto g1 = grads_of([&](Tape&, const std::vector<Var>& v) { return l1(v); }, {a, b});
    const auto g2 = grads_of([&](Tape&, const std::vector<Var>& v) { return l2(v); }, {a, b});
    const auto g = grads_of(
        [&](Tape&, const std::vector<Var>& v) { return add(scale(l1(v), alpha), scale(l2(v), beta)); }, {a, b});
    for (std::size_t p = 0; p < 2; ++p) {
      for (std::size_t i = 0; i < g[p].size(); ++i) {
        CHECK(std::abs(g[p][i] - (alpha * g1[p][i] + beta * g2[p][i])) <= 1e-10);
      }
    }
  }
}

TEST_CASE("weighted_mean: values and gradient by linearity") {
  Tape tape;
  const Var l = tape.parameter(Tensor::vector({0.5, 9.9}));
  const std::vector<double> w{2.0, 0.0};
  const Var m = weighted_mean(l, w);
  CHECK(m.value().item() == 0.5);
  const auto g = tape.backward(m);
  CHECK(g[0] == Tensor::vector({1.0, 0.0}));
  CHECK_THROWS_AS(weighted_mean(l, std::vector<double>{1.0}), ShapeError);

  Tape t2;
  const Var l2 = t2.constant(Tensor::vector({0.25, 0.5, 2.0}));
  const std::vector<double> ones(3, 1.0);
  CHECK(weighted_mean(l2, ones).value().item() == mean(l2.value()).item());
}

TEST_CASE("taped evaluation is deterministic") {
  Rng rng(77);
  const Tensor a = random_tensor({4, 4}, rng);
  auto run = [&] {
    return grads_of([](Tape&, const std::vector<Var>& v) { return sum(exp(scale(matmul(v[0], v[0]), 0.1))); }, {a});
  };
  CHECK(run()[0] == run()[0]);
}
