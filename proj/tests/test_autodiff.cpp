#include <doctest.h>

#include <cmath>

#include "survdro/autodiff.hpp"

using namespace survdro;
using ad::Var;

TEST_CASE("quadratic gradient") {
  auto grad = ad::gradient(
      [](ad::Tape&, std::span<const Var> x) { return x[0] * x[0] + x[1] * x[1]; },
      std::vector<double>{1.0, 2.0});
  CHECK(grad[0] == doctest::Approx(2.0));
  CHECK(grad[1] == doctest::Approx(4.0));
}

TEST_CASE("gradient of a linear score is the input") {
  std::vector<double> x{0.4, -1.1, 2.0};
  auto grad = ad::gradient(
      [&](ad::Tape&, std::span<const Var> theta) {
        Var acc = theta[0] * x[0];
        for (std::size_t i = 1; i < x.size(); ++i) acc = acc + theta[i] * x[i];
        return acc;
      },
      std::vector<double>{0.3, 0.7, -0.2});
  CHECK(grad == x);
}

TEST_CASE("composite primitives match finite differences") {
  auto fn_var = [](ad::Tape& t, std::span<const Var> x) {
    Var a = exp(x[0] * 0.3) + log(x[1] + 3.0);
    Var b = sqrt(x[2] * x[2] + 1.0);
    Var c = relu(x[0] - 0.2) + abs(x[1] - 0.7);
    return a * b + c / (x[2] + 2.0) + max(x[0], x[1]) + t.constant(1.5) * x[2];
  };
  auto fn_plain = [&](std::span<const double> x) {
    ad::Tape t;
    std::vector<Var> leaves;
    for (double v : x) leaves.push_back(t.leaf(v));
    return fn_var(t, leaves).value();
  };
  std::vector<double> at{0.9, -0.4, 0.55};
  auto analytic = ad::gradient(fn_var, at);
  auto numeric = ad::finite_difference_gradient(fn_plain, at);
  for (std::size_t i = 0; i < at.size(); ++i)
    CHECK(analytic[i] == doctest::Approx(numeric[i]).epsilon(1e-7));
}

TEST_CASE("relu and positive part take subgradient zero at the kink") {
  ad::Tape t;
  Var x = t.leaf(0.0);
  auto adj = t.backward(relu(x));
  CHECK(adj[static_cast<std::size_t>(x.index)] == 0.0);
  auto adj2 = t.backward(abs(x));
  CHECK(adj2[static_cast<std::size_t>(x.index)] == 0.0);
}

TEST_CASE("log_clamped floors the argument and kills the gradient below the floor") {
  ad::Tape t;
  Var x = t.leaf(1e-15);
  Var y = log_clamped(x);
  CHECK(y.value() == doctest::Approx(std::log(1e-12)));
  auto adj = t.backward(y);
  CHECK(adj[static_cast<std::size_t>(x.index)] == 0.0);
}

TEST_CASE("backward on a non-finite root throws") {
  ad::Tape t;
  Var x = t.leaf(-1.0);
  Var y = log(x);
  CHECK_THROWS_AS((void)t.backward(y), NumericError);
}
