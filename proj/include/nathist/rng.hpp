#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace nathist {

// Purpose tag baked into the RNG counter so that every update type and every
// individual gets its own stream. Draws are then independent of thread count
// and of the order in which per-individual updates run.
enum class Stream : std::uint32_t {
  Generic = 0,
  GibbsBeta = 1,
  RateH = 2,
  RateProg = 3,
  PsiBlock = 4,
  ZiProposal = 5,
  Zhp = 6,
  Init = 7,
  Sim = 8,
  Loo = 9,
  Overdx = 10,
  PsiBlockAccept = 11,
};

// Counter-based generator (Philox4x32-10). A stream is identified by
// (seed, purpose, sweep, unit); successive outputs advance only the block
// index, so streams never collide.
class Rng {
 public:
  Rng(std::uint64_t seed, Stream purpose, std::uint32_t sweep = 0,
      std::uint32_t unit = 0)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        prefix_{static_cast<std::uint32_t>(purpose), sweep, unit} {}

  std::uint64_t next_u64() {
    if (avail_ == 0) refill();
    avail_ -= 2;
    const std::uint64_t lo = buf_[avail_];
    const std::uint64_t hi = buf_[avail_ + 1];
    return lo | (hi << 32);
  }

  // Strictly inside (0,1); offset by half an ulp of the 53-bit grid.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  // Marsaglia-Tsang; shape < 1 handled by boosting.
  double gamma(double shape, double rate) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v / rate;
    }
  }

  double beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    return x / (x + y);
  }

  int poisson(double mean) {
    const double limit = std::exp(-mean);
    double prod = uniform();
    int k = 0;
    while (prod > limit) {
      prod *= uniform();
      ++k;
    }
    return k;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  void refill() {
    std::array<std::uint32_t, 4> ctr{block_, prefix_[2], prefix_[1],
                                     prefix_[0]};
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = 0xD2511F53ull * ctr[0];
      const std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
    }
    buf_ = ctr;
    avail_ = 4;
    ++block_;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 3> prefix_;  // purpose, sweep, unit
  std::uint32_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int avail_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Distinct per-chain seeds derived from one user seed (splitmix64 step).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace nathist
