#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace ionread {

/// 64-bit avalanche mixer (the splitmix64 finalizer). Every bit of the input
/// affects every bit of the output, which is what makes per-index seed
/// derivation safe: neighboring indices yield unrelated streams.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ull;

/// Independent stream seed for item `index` under a master seed. Used by the
/// dataset generator and the trainers so that work can be split across any
/// number of workers without changing a single drawn value.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master ^ mix64(index + kGoldenGamma));
}

/// Deterministic splitmix64 generator with the handful of draws the simulator
/// needs. Hand-rolled on purpose: standard-library distributions are free to
/// change between library versions, and every number in this project must be
/// reproducible from a seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  /// Uniform double in [0, 1), 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  bool bernoulli(double p) { return next_double() < p; }

  /// Unbiased integer in [0, n). Lemire's multiply-shift with rejection.
  std::uint64_t bounded(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::bounded: n must be positive");
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t cutoff = (0 - n) % n;
      while (lo < cutoff) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Poisson draw by Knuth's product method. Large means are split into
  /// independent chunks (Poisson(a+b) = Poisson(a) + Poisson(b)) so the
  /// exp(-lambda) factor never underflows.
  int poisson(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw std::invalid_argument("Rng::poisson: lambda must be finite and >= 0");
    int n = 0;
    while (lambda > kPoissonChunk) {
      n += poisson_small(kPoissonChunk, kExpNegChunk);
      lambda -= kPoissonChunk;
    }
    return n + poisson_small(lambda, std::exp(-lambda));
  }

  /// Same draw with exp(-lambda) precomputed by the caller; the trajectory
  /// sampler keeps the two per-state values around to avoid exp() per bin.
  int poisson_pre(double lambda, double exp_neg_lambda) {
    if (lambda > kPoissonChunk) return poisson(lambda);
    return poisson_small(lambda, exp_neg_lambda);
  }

 private:
  static constexpr double kPoissonChunk = 60.0;
  // exp(-60), spelled out so poisson() stays allocation- and recomputation-free.
  static constexpr double kExpNegChunk = 8.7565107626965203e-27;

  int poisson_small(double lambda, double exp_neg_lambda) {
    if (lambda <= 0.0) return 0;
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= next_double();
    } while (p > exp_neg_lambda);
    return k - 1;
  }

  std::uint64_t state_;
};

}  // namespace ionread
