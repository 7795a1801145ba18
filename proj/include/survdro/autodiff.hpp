#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "survdro/common.hpp"

namespace survdro::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
struct Var {
  Tape* tape = nullptr;
  std::int32_t index = -1;

  double value() const;
};

// Eager reverse-mode tape over scalars. Supported primitives: affine
// arithmetic, exp, log (plain and probability-clamped), sqrt, relu / positive
// part, abs and pairwise max. Local partials are frozen at construction, so a
// backward pass is a single reverse sweep. Subgradient 0 is chosen at the
// relu, [.]_+ and abs kinks.
class Tape {
 public:
  Var leaf(double v) { return push(v, -1, -1, 0.0, 0.0); }
  Var constant(double v) { return push(v, -1, -1, 0.0, 0.0); }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  double value(std::int32_t i) const { return nodes_[static_cast<std::size_t>(i)].val; }

  Var push(double val, std::int32_t a, std::int32_t b, double da, double db) {
    nodes_.push_back(Node{val, da, db, a, b});
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  // Adjoints of every node w.r.t. `root`; index with a leaf's node index.
  std::vector<double> backward(Var root) const {
    if (!std::isfinite(root.value()))
      throw NumericError("autodiff: non-finite value at backward root");
    std::vector<double> adj(nodes_.size(), 0.0);
    adj[static_cast<std::size_t>(root.index)] = 1.0;
    for (std::int32_t i = root.index; i >= 0; --i) {
      double a = adj[static_cast<std::size_t>(i)];
      if (a == 0.0) continue;
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.a >= 0) adj[static_cast<std::size_t>(n.a)] += n.da * a;
      if (n.b >= 0) adj[static_cast<std::size_t>(n.b)] += n.db * a;
    }
    return adj;
  }

 private:
  struct Node {
    double val;
    double da, db;
    std::int32_t a, b;
  };
  std::vector<Node> nodes_;
};

inline double Var::value() const { return tape->value(index); }

inline Var operator+(Var x, Var y) { return x.tape->push(x.value() + y.value(), x.index, y.index, 1.0, 1.0); }
inline Var operator+(Var x, double c) { return x.tape->push(x.value() + c, x.index, -1, 1.0, 0.0); }
inline Var operator+(double c, Var x) { return x + c; }

inline Var operator-(Var x, Var y) { return x.tape->push(x.value() - y.value(), x.index, y.index, 1.0, -1.0); }
inline Var operator-(Var x, double c) { return x + (-c); }
inline Var operator-(double c, Var x) { return x.tape->push(c - x.value(), x.index, -1, -1.0, 0.0); }
inline Var operator-(Var x) { return x.tape->push(-x.value(), x.index, -1, -1.0, 0.0); }

inline Var operator*(Var x, Var y) { return x.tape->push(x.value() * y.value(), x.index, y.index, y.value(), x.value()); }
inline Var operator*(Var x, double c) { return x.tape->push(x.value() * c, x.index, -1, c, 0.0); }
inline Var operator*(double c, Var x) { return x * c; }

inline Var operator/(Var x, Var y) {
  double yv = y.value();
  return x.tape->push(x.value() / yv, x.index, y.index, 1.0 / yv, -x.value() / (yv * yv));
}
inline Var operator/(Var x, double c) { return x * (1.0 / c); }
inline Var operator/(double c, Var x) {
  double xv = x.value();
  return x.tape->push(c / xv, x.index, -1, -c / (xv * xv), 0.0);
}

inline Var exp(Var x) {
  double e = std::exp(x.value());
  return x.tape->push(e, x.index, -1, e, 0.0);
}

inline Var log(Var x) { return x.tape->push(std::log(x.value()), x.index, -1, 1.0 / x.value(), 0.0); }

// log(max(p, floor)); derivative 0 below the floor.
inline Var log_clamped(Var x, double floor = 1e-12) {
  double v = x.value();
  if (v > floor) return log(x);
  return x.tape->push(std::log(floor), x.index, -1, 0.0, 0.0);
}

inline Var sqrt(Var x) {
  double s = std::sqrt(x.value());
  return x.tape->push(s, x.index, -1, 0.5 / s, 0.0);
}

inline Var relu(Var x) {
  double v = x.value();
  return x.tape->push(v > 0.0 ? v : 0.0, x.index, -1, v > 0.0 ? 1.0 : 0.0, 0.0);
}

inline Var abs(Var x) {
  double v = x.value();
  return x.tape->push(std::fabs(v), x.index, -1, v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0), 0.0);
}

// Ties route the gradient to the first argument.
inline Var max(Var x, Var y) {
  if (x.value() >= y.value()) return x.tape->push(x.value(), x.index, y.index, 1.0, 0.0);
  return x.tape->push(y.value(), x.index, y.index, 0.0, 1.0);
}

// double mirrors so templated code compiles for plain evaluation.
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double log_clamped(double x, double floor = 1e-12) { return std::log(x > floor ? x : floor); }
inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double abs(double x) { return std::fabs(x); }
inline double max(double a, double b) { return a > b ? a : b; }

// Exact reverse-mode gradient of a scalar function built from tape primitives.
inline std::vector<double> gradient(
    const std::function<Var(Tape&, std::span<const Var>)>& fn,
    std::span<const double> at) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(at.size());
  for (double v : at) leaves.push_back(tape.leaf(v));
  Var root = fn(tape, leaves);
  std::vector<double> adj = tape.backward(root);
  std::vector<double> grad(at.size());
  for (std::size_t i = 0; i < at.size(); ++i)
    grad[i] = adj[static_cast<std::size_t>(leaves[i].index)];
  return grad;
}

// Central finite differences; the independent check used by the gradcheck suites.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& fn,
    std::span<const double> at, double step = 1e-5) {
  std::vector<double> x(at.begin(), at.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double keep = x[i];
    x[i] = keep + step;
    double hi = fn(x);
    x[i] = keep - step;
    double lo = fn(x);
    x[i] = keep;
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

}  // namespace survdro::ad
