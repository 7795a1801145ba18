#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "survdro/models.hpp"

using namespace survdro;

TEST_CASE("linear forward is a dot product") {
  ModelSpec spec{ModelKind::Linear, 2, {}, 1};
  Eigen::VectorXd theta(2);
  theta << 1.0, -2.0;
  Eigen::VectorXd x(2);
  x << 3.0, 1.0;
  CHECK(forward_scalar(spec, theta, x) == doctest::Approx(1.0));
  CHECK(forward_scalar(spec, Eigen::VectorXd::Zero(2), x) == doctest::Approx(0.0));
}

TEST_CASE("hand-propagated relu MLP") {
  // 2 -> 2 -> 1, all-ones weights, zero bias: relu(W1 x) = (2, 2), head = 4.
  ModelSpec spec{ModelKind::MlpScalar, 2, {2}, 1};
  Eigen::VectorXd theta = Eigen::VectorXd::Ones(spec.param_count());
  theta[4] = theta[5] = 0.0;  // hidden bias
  theta[8] = 0.0;             // head bias
  Eigen::VectorXd x(2);
  x << 1.0, 1.0;
  CHECK(forward_scalar(spec, theta, x) == doctest::Approx(4.0));
}

TEST_CASE("dimension mismatches throw") {
  ModelSpec spec{ModelKind::Linear, 2, {}, 1};
  Eigen::VectorXd theta(2);
  theta << 1.0, 1.0;
  Eigen::VectorXd x(3);
  x << 1.0, 1.0, 1.0;
  CHECK_THROWS_AS(forward_scalar(spec, theta, x), ValidationError);
  CHECK_THROWS_AS(forward_scalar(spec, Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(2)),
                  ValidationError);
}

TEST_CASE("simplex head is a softmax") {
  ModelSpec spec{ModelKind::MlpSimplex, 1, {}, 4};
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(spec.param_count());
  Eigen::VectorXd x(1);
  x << 0.7;
  auto p = forward_simplex(spec, theta, x);
  for (double v : p) CHECK(v == doctest::Approx(0.25));

  ModelSpec two{ModelKind::MlpSimplex, 1, {}, 2};
  Eigen::VectorXd t2 = Eigen::VectorXd::Zero(two.param_count());
  // zero weights; set head biases to (ln 2, 0)
  t2[2] = std::log(2.0);
  t2[3] = 0.0;
  auto q = forward_simplex(two, t2, x);
  CHECK(q[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("simplex outputs stay on the simplex for random models") {
  Rng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    int d = 1 + static_cast<int>(rng.below(4));
    int m = 2 + static_cast<int>(rng.below(6));
    ModelSpec spec{ModelKind::MlpSimplex, d, {4}, m};
    ModelParams params = init_params(spec, 100 + static_cast<std::uint64_t>(trial));
    Eigen::VectorXd x(d);
    for (int c = 0; c < d; ++c) x[c] = 3.0 * rng.normal();
    auto p = forward_simplex(spec, params.theta, x);
    double total = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      total += v;
    }
    CHECK(std::fabs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("initialization is seeded and respects the fan bound") {
  ModelSpec spec{ModelKind::MlpScalar, 3, {24}, 1};
  ModelParams a = init_params(spec, 42);
  ModelParams b = init_params(spec, 42);
  CHECK(a.theta == b.theta);
  ModelParams c = init_params(spec, 43);
  CHECK(a.theta != c.theta);
  double bound = std::sqrt(6.0 / (3 + 24));
  for (int i = 0; i < 3 * 24; ++i) CHECK(std::fabs(a.theta[i]) <= bound);
}

TEST_CASE("gradients of random MLPs match central finite differences") {
  Rng rng(77);
  int checked = 0;
  std::uint64_t attempt = 0;
  while (checked < 100) {
    ++attempt;
    int d = 1 + static_cast<int>(rng.below(4));
    bool simplex = rng.below(2) == 0;
    int m = simplex ? 2 + static_cast<int>(rng.below(4)) : 1;
    ModelSpec spec{simplex ? ModelKind::MlpSimplex : ModelKind::MlpScalar, d,
                   {2 + static_cast<int>(rng.below(3))}, m};
    ModelParams params = init_params(spec, 1000 + attempt);
    for (Eigen::Index i = 0; i < params.theta.size(); ++i)
      params.theta[i] += 0.3 * rng.normal();
    Eigen::VectorXd x(d);
    for (int c = 0; c < d; ++c) x[c] = rng.normal();

    // keep the check away from relu kinks
    bool near_kink = false;
    {
      std::vector<int> widths = spec.layer_widths();
      Eigen::VectorXd act = x;
      int offset = 0;
      for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        int in = widths[l], out = widths[l + 1];
        Eigen::VectorXd next(out);
        for (int o = 0; o < out; ++o) {
          double acc = params.theta[offset + out * in + o];
          for (int i = 0; i < in; ++i) acc += params.theta[offset + o * in + i] * act[i];
          next[o] = acc;
          if (l + 2 < widths.size() + 0 && std::fabs(acc) < 1e-3) near_kink = true;
        }
        offset += out * in + out;
        if (l + 2 < widths.size())
          for (int o = 0; o < out; ++o) next[o] = std::max(next[o], 0.0);
        act = next;
      }
    }
    if (near_kink) continue;

    std::vector<double> weights;  // random linear functional to scalarize simplex outputs
    for (int j = 0; j < m; ++j) weights.push_back(rng.uniform(-1.0, 1.0));

    auto loss_var = [&](ad::Tape&, std::span<const ad::Var> th) {
      if (simplex) {
        auto p = forward_simplex(spec, th, x);
        ad::Var acc = p[0] * weights[0];
        for (int j = 1; j < m; ++j) acc = acc + p[static_cast<std::size_t>(j)] * weights[static_cast<std::size_t>(j)];
        return acc;
      }
      return forward_scalar(spec, th, x);
    };
    auto loss_plain = [&](std::span<const double> th) {
      Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(th.data(), static_cast<Eigen::Index>(th.size()));
      if (simplex) {
        auto p = forward_simplex(spec, t, x);
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += p[static_cast<std::size_t>(j)] * weights[static_cast<std::size_t>(j)];
        return acc;
      }
      return forward_scalar(spec, t, x);
    };

    std::vector<double> at(params.theta.data(), params.theta.data() + params.theta.size());
    auto analytic = ad::gradient(loss_var, at);
    auto numeric = ad::finite_difference_gradient(loss_plain, at, 1e-5);
    CHECK(testutil::max_rel_err(analytic, numeric) <= 1e-4);
    ++checked;
  }
}
