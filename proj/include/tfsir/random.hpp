#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace tfsir {

// SplitMix64 finalizer. Used to derive independent stream seeds from a base
// seed so that (base, stream) -> seed is reproducible and well mixed.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

// Chain-private random source. Not thread safe; give each chain, replicate
// or simulation its own instance.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  engine_type& engine() noexcept { return engine_; }

  // Uniform on the open interval (0, 1).
  double uniform() {
    double u;
    do {
      u = std::generate_canonical<double, 53>(engine_);
    } while (u <= 0.0);
    return u;
  }

  double normal() { return std_normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * std_normal_(engine_); }

  // Gamma(shape, scale) with mean shape * scale. Never returns exactly 0.
  double gamma(double shape, double scale) {
    std::gamma_distribution<double> dist(shape, scale);
    return std::max(dist(engine_), std::numeric_limits<double>::min());
  }

  // Inverse gamma IG(shape, scale): density proportional to
  // x^{-shape-1} exp(-scale / x).
  double inv_gamma(double shape, double scale) { return 1.0 / gamma(shape, 1.0 / scale); }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  std::int64_t poisson(double mean) {
    if (!(mean > 0.0)) return 0;
    std::poisson_distribution<std::int64_t> dist(mean);
    return dist(engine_);
  }

 private:
  engine_type engine_;
  std::normal_distribution<double> std_normal_{0.0, 1.0};
};

}  // namespace tfsir
