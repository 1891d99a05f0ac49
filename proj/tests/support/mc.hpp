// Monte Carlo oracles, deliberately independent of the library's numerics:
// Box-Muller normal draws (the library inverts the normal CDF) and Robert
// (1995) rejection sampling for the truncated normal (the library uses
// closed-form Mills-ratio moments).
#ifndef HAFT_TESTS_MC_HPP
#define HAFT_TESTS_MC_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace mc {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // open (0,1)
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // Draw Z | Z > a for standard normal Z.  Plain rejection below the mean;
  // Robert's translated-exponential envelope in the upper tail, where plain
  // rejection stalls.
  double trunc_normal_above(double a) {
    if (a <= 0.0) {
      while (true) {
        const double z = normal();
        if (z > a) return z;
      }
    }
    const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
    while (true) {
      const double z = a - std::log(uniform()) / lambda;
      const double rho = std::exp(-0.5 * (z - lambda) * (z - lambda));
      if (uniform() <= rho) return z;
    }
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mc

#endif  // HAFT_TESTS_MC_HPP
