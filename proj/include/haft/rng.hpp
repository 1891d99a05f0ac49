#ifndef HAFT_RNG_HPP
#define HAFT_RNG_HPP

#include <cstdint>
#include <random>

#include "haft/numkernel.hpp"

namespace haft {

/// SplitMix64 output mix (Vigna 2015) — used to spread one master seed into
/// independent stream seeds.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed for stream `index` derived from a master seed: the (index+1)-th
/// SplitMix64 output.  Distinct indices give decorrelated generators.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t state = master;
  std::uint64_t out = 0;
  for (std::uint64_t k = 0; k <= index; ++k) out = splitmix64_next(state);
  return out;
}

/// Deterministic, portable draw source: std::mt19937_64 (bit-exact across
/// platforms by the C++ standard) with explicit variate mappings — no
/// std::*_distribution, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on the open interval (0, 1): (x >> 11 + 0.5) * 2^-53.
  double uniform01() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal by inversion; exactness of the quantile makes the
  /// stream reproducible wherever uniform01 is.
  double normal() { return norm_quantile(uniform01()); }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace haft

#endif  // HAFT_RNG_HPP
