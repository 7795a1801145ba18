#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "survdro/autodiff.hpp"
#include "survdro/common.hpp"

namespace survdro {

// Make the tape primitives (and their double mirrors) visible to templated
// numerical code written against a generic scalar type.
using ad::abs;
using ad::exp;
using ad::log;
using ad::log_clamped;
using ad::max;
using ad::relu;
using ad::sqrt;

enum class ModelKind { Linear, MlpScalar, MlpSimplex };

// Architecture descriptor. Linear is a bias-free dot product; the MLPs use
// relu hidden layers and a raw linear head (softmax is applied by the simplex
// forward pass, not stored in the parameters).
struct ModelSpec {
  ModelKind kind = ModelKind::Linear;
  int input_dim = 0;
  std::vector<int> hidden;
  int output_dim = 1;  // 1 for scalar heads, m for simplex heads

  void validate() const;
  int param_count() const;
  // Widths of the affine chain: input_dim, hidden..., output_dim.
  std::vector<int> layer_widths() const;
};

struct ModelParams {
  Eigen::VectorXd theta;
  Eigen::VectorXd log_hazard;  // piecewise-constant baseline, exact-Cox training only

  bool has_baseline() const { return log_hazard.size() > 0; }
};

// Seeded uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)) per layer.
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

// Scalar score f(x; theta). Templated so the same arithmetic runs on plain
// doubles and on the autodiff tape; `theta` must expose operator[](int) -> S.
template <class S, class ThetaAt>
S forward_scalar_t(const ModelSpec& spec, const ThetaAt& theta, const Eigen::VectorXd& x);

// Head logits of an MLP (pre-softmax), or the generic affine chain output.
template <class S, class ThetaAt>
std::vector<S> forward_logits_t(const ModelSpec& spec, const ThetaAt& theta, const Eigen::VectorXd& x);

double forward_scalar(const ModelSpec& spec, const Eigen::VectorXd& theta, const Eigen::VectorXd& x);
ad::Var forward_scalar(const ModelSpec& spec, std::span<const ad::Var> theta, const Eigen::VectorXd& x);

// Probability vector on the m-simplex (softmax of the head logits, stabilized
// by max subtraction).
std::vector<double> forward_simplex(const ModelSpec& spec, const Eigen::VectorXd& theta, const Eigen::VectorXd& x);
std::vector<ad::Var> forward_simplex(const ModelSpec& spec, std::span<const ad::Var> theta, const Eigen::VectorXd& x);

// Flat parameter list as CSV (one value per line) plus the matching loader.
void save_params_csv(const std::string& path, const ModelParams& params);
ModelParams load_params_csv(const std::string& path);

// ---------------------------------------------------------------------------

namespace detail {

inline double value_of(double x) { return x; }
inline double value_of(ad::Var x) { return x.value(); }

template <class S, class ThetaAt>
std::vector<S> affine_chain(const ModelSpec& spec, const ThetaAt& theta, const Eigen::VectorXd& x) {
  if (x.size() != spec.input_dim) throw ValidationError("input dimension mismatch");
  std::vector<int> widths = spec.layer_widths();
  std::vector<S> act;
  act.reserve(static_cast<std::size_t>(spec.input_dim));

  int offset = 0;
  for (std::size_t layer = 0; layer + 1 < widths.size(); ++layer) {
    int in = widths[layer];
    int out = widths[layer + 1];
    std::vector<S> next;
    next.reserve(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      S acc = theta[offset + o * in];  // seed with the first weight term
      if (layer == 0) {
        acc = acc * x[0];
        for (int i = 1; i < in; ++i) acc = acc + theta[offset + o * in + i] * x[i];
      } else {
        acc = acc * act[0];
        for (int i = 1; i < in; ++i) acc = acc + theta[offset + o * in + i] * act[static_cast<std::size_t>(i)];
      }
      acc = acc + theta[offset + out * in + o];  // bias
      next.push_back(acc);
    }
    offset += out * in + out;
    bool last = layer + 2 == widths.size();
    if (!last)
      for (auto& v : next) v = relu(v);
    act = std::move(next);
  }
  return act;
}

}  // namespace detail

template <class S, class ThetaAt>
std::vector<S> forward_logits_t(const ModelSpec& spec, const ThetaAt& theta, const Eigen::VectorXd& x) {
  if (spec.kind == ModelKind::Linear) {
    if (x.size() != spec.input_dim) throw ValidationError("input dimension mismatch");
    S acc = theta[0] * x[0];
    for (int i = 1; i < spec.input_dim; ++i) acc = acc + theta[i] * x[i];
    return {acc};
  }
  return detail::affine_chain<S>(spec, theta, x);
}

template <class S, class ThetaAt>
S forward_scalar_t(const ModelSpec& spec, const ThetaAt& theta, const Eigen::VectorXd& x) {
  if (spec.output_dim != 1) throw ValidationError("scalar forward pass requires output_dim == 1");
  return forward_logits_t<S>(spec, theta, x)[0];
}

template <class S, class ThetaAt>
std::vector<S> forward_simplex_t(const ModelSpec& spec, const ThetaAt& theta, const Eigen::VectorXd& x) {
  std::vector<S> logits = forward_logits_t<S>(spec, theta, x);
  double pivot = detail::value_of(logits[0]);
  for (const auto& z : logits) pivot = std::max(pivot, detail::value_of(z));
  std::vector<S> expd;
  expd.reserve(logits.size());
  S total = exp(logits[0] - pivot);
  expd.push_back(total);
  for (std::size_t j = 1; j < logits.size(); ++j) {
    expd.push_back(exp(logits[j] - pivot));
    total = total + expd.back();
  }
  for (auto& e : expd) e = e / total;
  return expd;
}

}  // namespace survdro
