#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "exitnet/autodiff.hpp"
#include "exitnet/optim.hpp"
#include "support.hpp"

using namespace exitnet;
using exitnet::testing::random_matrix;
using exitnet::testing::rel_err;

TEST_CASE("logsumexp examples") {
  CHECK(logsumexp(std::vector<double>{0.0, 0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(logsumexp(std::vector<double>{-3.25}) == -3.25);
  CHECK(logsumexp(std::vector<double>{1000.0, 1000.0}) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  CHECK(std::isfinite(logsumexp(std::vector<double>{1e6, -1e6, 1e6})));
  CHECK_THROWS_WITH_AS(logsumexp(std::vector<double>{}), "logsumexp: empty input", std::invalid_argument);
}

TEST_CASE("logsumexp lies between max and max + ln n") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::uniform_int_distribution<int> len(1, 20);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (double& x : v) x = u(rng);
    const double mx = *std::max_element(v.begin(), v.end());
    const double l = logsumexp(v);
    CHECK(l >= mx);
    CHECK(l <= mx + std::log(static_cast<double>(v.size())) + 1e-12);
  }
}

TEST_CASE("backward on a quadratic") {
  Parameter p("p", Tensor::vector({1.0, 2.0, 3.0}));
  Graph g;
  Var x = g.param(p);
  g.backward(sum(x * x));
  CHECK(p.grad == Tensor::vector({2.0, 4.0, 6.0}));
}

TEST_CASE("constant loss gives zero gradient") {
  Parameter p("p", Tensor::vector({1.0, -2.0}));
  Graph g;
  g.param(p);
  Var c = g.constant(Tensor::scalar(4.0));
  g.backward(c);
  CHECK(p.grad == Tensor::vector({0.0, 0.0}));
}

TEST_CASE("non-scalar root is rejected") {
  Parameter p("p", Tensor::vector({1.0, 2.0}));
  Graph g;
  Var x = g.param(p);
  CHECK_THROWS_AS(g.backward(x * x), std::invalid_argument);
}

TEST_CASE("gradients accumulate until zero_grad") {
  Parameter p("p", Tensor::vector({1.0, 2.0, 3.0}));
  for (int i = 0; i < 2; ++i) {
    Graph g;
    Var x = g.param(p);
    g.backward(sum(x * x));
  }
  CHECK(p.grad == Tensor::vector({4.0, 8.0, 12.0}));
  p.zero_grad();
  Graph g;
  Var x = g.param(p);
  g.backward(sum(x * x));
  CHECK(p.grad == Tensor::vector({2.0, 4.0, 6.0}));
}

TEST_CASE("repeated backward on the same graph after reset is identical") {
  std::mt19937_64 rng(3);
  Parameter w("w", random_matrix(4, 3, rng));
  Graph g;
  Var x = g.constant(random_matrix(5, 4, rng));
  Var loss = mean(logsumexp_rows(tanh(matmul(x, g.param(w)))));
  g.backward(loss);
  const Tensor first = w.grad;
  w.zero_grad();
  g.backward(loss);
  CHECK(w.grad == first);
}

TEST_CASE("non-finite values are refused") {
  Graph g;
  Var a = g.constant(Tensor::vector({1e300}));
  CHECK_THROWS_AS(a * a, std::runtime_error);
}

TEST_CASE("broadcasting over the leading dimension and from scalars") {
  Graph g;
  Var m = g.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var b = g.constant(Tensor::vector({10, 20}));
  CHECK((m + b).value() == Tensor::matrix(2, 2, {11, 22, 13, 24}));
  CHECK((m * g.constant(Tensor::scalar(2.0))).value() == Tensor::matrix(2, 2, {2, 4, 6, 8}));
  CHECK_THROWS_AS(m + g.constant(Tensor::vector({1, 2, 3})), std::invalid_argument);
  CHECK_THROWS_AS(matmul(m, g.constant(Tensor::matrix(3, 1, {1, 2, 3}))), std::invalid_argument);
}

TEST_CASE("cross entropy rejects labels outside the class range") {
  Graph g;
  Var logits = g.constant(Tensor::matrix(1, 2, {0.0, 0.0}));
  std::vector<int> bad{2};
  CHECK_THROWS_AS(cross_entropy_rows(logits, bad), std::out_of_range);
  std::vector<int> ok{1};
  CHECK(cross_entropy_rows(logits, ok).value()[0] == doctest::Approx(std::log(2.0)));
}

namespace {

// Central differences on every entry of every parameter.
template <typename F>
double worst_fd_error(std::vector<Parameter>& params, F loss, double h = 1e-5) {
  for (auto& p : params) p.zero_grad();
  {
    Graph g;
    std::vector<Var> vs;
    for (auto& p : params) vs.push_back(g.param(p));
    g.backward(loss(g, vs));
  }
  double worst = 0.0;
  for (auto& p : params) {
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double orig = p.value[j];
      auto eval = [&](double v) {
        p.value[j] = v;
        Graph g;
        std::vector<Var> vs;
        for (auto& q : params) vs.push_back(g.param(q));
        return loss(g, vs).value().item();
      };
      const double num = (eval(orig + h) - eval(orig - h)) / (2 * h);
      p.value[j] = orig;
      worst = std::max(worst, rel_err(p.grad[j], num));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("random two-layer network matches finite differences") {
  std::mt19937_64 rng(5);
  const Tensor x = random_matrix(6, 4, rng);
  const std::vector<int> labels{0, 2, 1, 1, 0, 2};
  std::vector<Parameter> params;
  params.emplace_back("w1", random_matrix(4, 5, rng, 0.7));
  params.emplace_back("b1", Tensor::vector({0.1, -0.2, 0.05, 0.0, 0.3}));
  params.emplace_back("w2", random_matrix(5, 3, rng, 0.7));
  const double worst = worst_fd_error(params, [&](Graph& g, const std::vector<Var>& v) {
    Var h = tanh(matmul(g.constant(x), v[0]) + v[1]);
    return mean(cross_entropy_rows(matmul(h, v[2]), labels));
  });
  CHECK(worst < 1e-4);
}

TEST_CASE("every op in the set matches finite differences") {
  std::mt19937_64 rng(9);
  const Tensor x = random_matrix(4, 3, rng);
  std::vector<Parameter> params;
  params.emplace_back("a", random_matrix(3, 3, rng));
  params.emplace_back("b", random_matrix(4, 3, rng));
  const std::vector<std::size_t> idx{0, 2, 1, 2};
  const double worst = worst_fd_error(params, [&](Graph& g, const std::vector<Var>& v) {
    Var xa = matmul(g.constant(x), v[0]);
    Var s1 = sum(softmax_rows(xa) * v[1]);
    Var s2 = mean(logsumexp_rows(xa - v[1]));
    Var s3 = sum(gather_cols(sigmoid(v[1]), idx));
    Var s4 = scale(mean(sum_rows(relu(xa + g.constant(Tensor::scalar(0.05))))), 0.5);
    return s1 + s2 + s3 + s4;
  });
  CHECK(worst < 1e-4);
}

TEST_CASE("matmul counts multiply-adds") {
  Graph g;
  Var a = g.constant(Tensor(Shape{3, 4}, 1.0));
  Var b = g.constant(Tensor(Shape{4, 5}, 1.0));
  matmul(a, b);
  CHECK(g.flops() == 60);
}

TEST_CASE("adamw examples") {
  AdamWHyper hyper;
  hyper.base_lr = 0.1;
  hyper.weight_decay = 0.01;

  SUBCASE("decoupled decay with zero gradient") {
    std::vector<Parameter> ps{Parameter("w", Tensor::vector({1.0}))};
    AdamWState st;
    adamw_step(ps, st, hyper, 0.1);
    CHECK(ps[0].value[0] == doctest::Approx(0.999).epsilon(1e-15));
    CHECK(st.first_moment[0][0] == 0.0);
    CHECK(st.second_moment[0][0] == 0.0);
  }
  SUBCASE("zero learning rate still counts the step") {
    std::vector<Parameter> ps{Parameter("w", Tensor::vector({0.5, -2.0}))};
    ps[0].grad = Tensor::vector({3.0, -1.0});
    AdamWState st;
    adamw_step(ps, st, hyper, 0.0);
    CHECK(ps[0].value == Tensor::vector({0.5, -2.0}));
    CHECK(st.step == 1);
  }
  SUBCASE("bias correction on the first step") {
    hyper.weight_decay = 0.0;
    std::vector<Parameter> ps{Parameter("w", Tensor::vector({0.0}))};
    ps[0].grad = Tensor::vector({1.0});
    AdamWState st;
    adamw_step(ps, st, hyper, 0.1);
    CHECK(ps[0].value[0] == doctest::Approx(-0.1).epsilon(1e-6));
  }
  SUBCASE("zero gradient and zero decay is the identity") {
    hyper.weight_decay = 0.0;
    std::mt19937_64 rng(1);
    std::vector<Parameter> ps{Parameter("w", random_matrix(3, 3, rng))};
    const Tensor before = ps[0].value;
    AdamWState st;
    for (int i = 0; i < 5; ++i) adamw_step(ps, st, hyper, 0.1);
    CHECK(ps[0].value == before);
    CHECK(st.step == 5);
  }
  SUBCASE("shape mismatch") {
    std::vector<Parameter> ps{Parameter("w", Tensor::vector({1.0}))};
    AdamWState st;
    st.first_moment.push_back(Tensor::vector({0.0, 0.0}));
    st.second_moment.push_back(Tensor::vector({0.0, 0.0}));
    CHECK_THROWS_AS(adamw_step(ps, st, hyper, 0.1), std::invalid_argument);
  }
}

TEST_CASE("lr_at examples") {
  CHECK(lr_at(0, 100, 2e-5) == 2e-5);
  CHECK(lr_at(100, 100, 2e-5) == 0.0);
  CHECK(lr_at(50, 100, 2e-5) == doctest::Approx(1e-5).epsilon(1e-15));
  CHECK_THROWS_AS(lr_at(101, 100, 2e-5), std::invalid_argument);
}
