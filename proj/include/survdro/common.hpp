#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace survdro {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad or missing column layout in an input file.
struct SchemaError : Error {
  using Error::Error;
};

// Malformed cell content; message carries the 1-based data row index.
struct ParseError : Error {
  using Error::Error;
};

// Structurally valid input that violates a domain invariant.
struct ValidationError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct TrainingError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

// Deterministic RNG used everywhere a seed appears in a contract. Draws are
// hand-rolled on top of mt19937_64 so results do not depend on
// implementation-defined distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n). Multiply-shift mapping; bias is < 2^-64 and irrelevant here.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  double normal() {
    // Marsaglia polar method, no cached spare so draws stay position-independent.
    for (;;) {
      double u = uniform(-1.0, 1.0);
      double v = uniform(-1.0, 1.0);
      double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  template <class T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace survdro
