#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "fd_check.hpp"
#include "graph_gen.hpp"
#include "vamlab/autodiff.hpp"
#include "vamlab/optim.hpp"
#include "vamlab/rng.hpp"

using namespace vamlab;
using vamlab::ad::Matrix;
using vamlab::testing::finite_difference_check;
using vamlab::testing::random_matrix;

namespace {

Matrix from(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.begin()->size()));
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("row_softmax of zero logits is uniform") {
  ad::Tape tape;
  ad::Var s = tape.row_softmax(tape.constant(from({{0.0, 0.0}})));
  CHECK(s.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.value()(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("matmul against identity") {
  ad::Tape tape;
  ad::Var out = tape.matmul(tape.constant(Matrix::Identity(2, 2)),
                            tape.constant(from({{1, 2}, {3, 4}})));
  CHECK(out.value()(0, 0) == 1.0);
  CHECK(out.value()(0, 1) == 2.0);
  CHECK(out.value()(1, 0) == 3.0);
  CHECK(out.value()(1, 1) == 4.0);
}

TEST_CASE("mean of squares") {
  ad::Tape tape;
  ad::Var out = tape.mean(tape.square(tape.constant(from({{3.0, -3.0}}))));
  CHECK(out.value()(0, 0) == doctest::Approx(9.0));
}

TEST_CASE("d/dx mean(square(x)) = 2x/n") {
  ad::Tape tape;
  ad::Var x = tape.param(from({{1.0, 2.0}}));
  tape.backward(tape.mean(tape.square(x)));
  CHECK(x.grad()(0, 0) == doctest::Approx(1.0));
  CHECK(x.grad()(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("non-participating parameter gets a zero gradient") {
  ad::Tape tape;
  ad::Var used = tape.param(from({{1.0, -1.0}}));
  ad::Var unused = tape.param(from({{2.0, 2.0}, {2.0, 2.0}}));
  tape.backward(tape.mean(tape.square(used)));
  CHECK(unused.grad().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("composite softmax/matmul/square graph passes finite differences") {
  RngStream rng(7, "composite");
  auto build = [](ad::Tape& tape, const std::vector<ad::Var>& params) {
    ad::Var probs = tape.row_softmax(tape.matmul(params[0], tape.transpose(params[0])));
    return tape.mean(tape.square(probs));
  };
  const auto result = finite_difference_check(build, {random_matrix(rng, 4, 3)});
  CHECK(result.max_error < 1e-5);
}

TEST_CASE("every op individually passes finite differences") {
  RngStream rng(11, "per-op");
  const auto check = [&](const testing::GraphBuilder& build, std::vector<Matrix> params) {
    const auto r = finite_difference_check(build, std::move(params));
    CHECK(r.max_error < 1e-5);
  };

  check([](ad::Tape& t, const std::vector<ad::Var>& p) {
    return t.mean(t.add(p[0], p[1]));
  }, {random_matrix(rng, 3, 4), random_matrix(rng, 3, 4)});
  check([](ad::Tape& t, const std::vector<ad::Var>& p) {
    return t.mean(t.sub(p[0], p[1]));
  }, {random_matrix(rng, 3, 4), random_matrix(rng, 3, 4)});
  check([](ad::Tape& t, const std::vector<ad::Var>& p) {
    return t.mean(t.mul(p[0], p[1]));
  }, {random_matrix(rng, 3, 4), random_matrix(rng, 3, 4)});
  check([](ad::Tape& t, const std::vector<ad::Var>& p) {
    return t.mean(t.scalar_mul(-1.7, p[0]));
  }, {random_matrix(rng, 3, 4)});
  check([](ad::Tape& t, const std::vector<ad::Var>& p) {
    return t.mean(t.matmul(p[0], p[1]));
  }, {random_matrix(rng, 3, 5), random_matrix(rng, 5, 2)});
  check([](ad::Tape& t, const std::vector<ad::Var>& p) {
    return t.mean(t.square(t.transpose(p[0])));
  }, {random_matrix(rng, 3, 4)});
  check([](ad::Tape& t, const std::vector<ad::Var>& p) {
    return t.mean(t.row_softmax(p[0]));
  }, {random_matrix(rng, 4, 6)});
  check([](ad::Tape& t, const std::vector<ad::Var>& p) {
    return t.mean(t.square(t.row_sum(p[0])));
  }, {random_matrix(rng, 4, 6)});
  check([](ad::Tape& t, const std::vector<ad::Var>& p) {
    return t.mean(t.square(t.col_sum(p[0])));
  }, {random_matrix(rng, 4, 6)});
  check([](ad::Tape& t, const std::vector<ad::Var>& p) {
    return t.square(t.sum_all(p[0]));
  }, {random_matrix(rng, 4, 6)});
  check([](ad::Tape& t, const std::vector<ad::Var>& p) {
    return t.square(t.mean(p[0]));
  }, {random_matrix(rng, 4, 6)});
  check([](ad::Tape& t, const std::vector<ad::Var>& p) {
    return t.mean(t.log(t.row_softmax(p[0])));
  }, {random_matrix(rng, 4, 6)});
  check([](ad::Tape& t, const std::vector<ad::Var>& p) {
    return t.mean(t.square(t.gather_rows(p[0], {2, 0, 2})));
  }, {random_matrix(rng, 4, 3)});
  check([](ad::Tape& t, const std::vector<ad::Var>& p) {
    return t.dot(p[0], p[1]);
  }, {random_matrix(rng, 5, 1), random_matrix(rng, 5, 1)});
}

TEST_CASE("100 random composite graphs pass finite differences") {
  RngStream rng(2024, "graphs");
  for (int g = 0; g < 100; ++g) {
    auto graph = testing::make_random_graph(rng);
    const auto result = finite_difference_check(graph.build, graph.params);
    INFO("graph ", g);
    CHECK(result.max_error < 1e-5);
  }
}

TEST_CASE("row_softmax rows are strictly positive and sum to one") {
  RngStream rng(5, "softmax");
  for (int i = 0; i < 50; ++i) {
    ad::Tape tape;
    const Matrix logits = random_matrix(rng, 1 + rng.next_below(8), 1 + rng.next_below(8), 5.0);
    const Matrix s = tape.row_softmax(tape.constant(logits)).value();
    CHECK(s.minCoeff() > 0.0);
    for (int r = 0; r < s.rows(); ++r) {
      CHECK(std::abs(s.row(r).sum() - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("stop_gradient blocks every path through it") {
  ad::Tape tape;
  ad::Var x = tape.param(from({{1.0, 2.0}, {3.0, 4.0}}));
  // loss = mean(x .* sg(x)): only the direct factor contributes.
  ad::Var sg = tape.stop_gradient(x);
  tape.backward(tape.mean(tape.mul(x, sg)));
  // d/dx mean(x * c) with c = x held fixed = x / n.
  CHECK(x.grad()(0, 0) == doctest::Approx(1.0 / 4.0));
  CHECK(x.grad()(1, 1) == doctest::Approx(4.0 / 4.0));

  ad::Tape tape2;
  ad::Var y = tape2.param(from({{1.0, 2.0}}));
  tape2.backward(tape2.mean(tape2.square(tape2.stop_gradient(y))));
  CHECK(y.grad().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward is deterministic: identical tapes give bitwise-identical gradients") {
  RngStream rng(3, "determinism");
  auto graph = testing::make_random_graph(rng);
  auto run = [&]() {
    ad::Tape tape;
    std::vector<ad::Var> params;
    for (const auto& v : graph.params) params.push_back(tape.param(v));
    tape.backward(graph.build(tape, params));
    std::vector<Matrix> grads;
    for (const auto& p : params) grads.push_back(tape.grad(p));
    return grads;
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].size() == b[i].size());
    CHECK(std::memcmp(a[i].data(), b[i].data(), sizeof(double) * a[i].size()) == 0);
  }
}

TEST_CASE("shape mismatches raise ConfigError") {
  ad::Tape tape;
  ad::Var a = tape.constant(Matrix::Zero(2, 3));
  ad::Var b = tape.constant(Matrix::Zero(3, 2));
  CHECK_THROWS_AS(tape.add(a, b), ConfigError);
  CHECK_THROWS_AS(tape.matmul(a, a), ConfigError);
  CHECK_THROWS_AS(tape.gather_rows(a, {5}), ConfigError);
}

TEST_CASE("non-finite outputs raise NumericError naming the op") {
  ad::Tape tape;
  ad::Var big = tape.constant(Matrix::Constant(1, 1, 1e308));
  try {
    tape.square(big);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("square") != std::string::npos);
  }
  ad::Var neg = tape.constant(Matrix::Constant(1, 1, -1.0));
  CHECK_THROWS_AS(tape.log(neg), NumericError);
}

TEST_CASE("backward demands a scalar loss") {
  ad::Tape tape;
  ad::Var x = tape.param(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(tape.backward(tape.square(x)), std::logic_error);
}

TEST_CASE("adam first step moves by about the learning rate") {
  RngStream rng(9, "adam");
  Matrix param = Matrix::Zero(3, 3);
  Matrix grad = random_matrix(rng, 3, 3);
  grad = grad.unaryExpr([](double g) { return std::abs(g) < 1e-4 ? 1e-4 : g; });
  ad::AdamState state(0.01);
  const Matrix before = param;
  adam_step(param, grad, state);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double delta = param(i, j) - before(i, j);
      CHECK(std::abs(delta) >= 0.0099);
      CHECK(std::abs(delta) <= 0.01);
      CHECK(delta * grad(i, j) < 0.0);  // moves against the gradient
    }
  }
}

TEST_CASE("adam leaves the parameter untouched for a zero gradient") {
  Matrix param = Matrix::Constant(2, 2, 3.5);
  ad::AdamState state(0.01);
  adam_step(param, Matrix::Zero(2, 2), state);
  CHECK((param.array() == 3.5).all());
}

TEST_CASE("200 adam steps minimize x^2 from x = 1") {
  Matrix x = Matrix::Constant(1, 1, 1.0);
  ad::AdamState state(0.05);
  for (int i = 0; i < 200; ++i) {
    const Matrix grad = 2.0 * x;
    adam_step(x, grad, state);
  }
  CHECK(std::abs(x(0, 0)) < 1e-2);
}

TEST_CASE("adam rejects mismatched shapes") {
  Matrix param = Matrix::Zero(2, 2);
  ad::AdamState state;
  CHECK_THROWS_AS(adam_step(param, Matrix::Zero(3, 1), state), ConfigError);
}
