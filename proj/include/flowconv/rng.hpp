#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace flowconv {

/// Reproducible random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; every derived draw below is computed
/// here rather than through <random> distributions, whose algorithms are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Poisson draw by sequential inversion. Large means are split into chunks
  /// so exp(-lambda) never underflows.
  std::int64_t poisson(double lambda) {
    if (!(lambda > 0.0)) return 0;
    std::int64_t total = 0;
    while (lambda > 0.0) {
      const double chunk = std::min(lambda, 50.0);
      lambda -= chunk;
      double p = std::exp(-chunk);
      double cdf = p;
      const double u = uniform();
      std::int64_t x = 0;
      while (u > cdf && p > 0.0) {
        ++x;
        p *= chunk / static_cast<double>(x);
        cdf += p;
      }
      total += x;
    }
    return total;
  }

  /// Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace flowconv
