#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace kbsnmf {

// Seeded generator with explicit bit-to-double mappings, so that a given
// seed produces the same stream on every build of this library (stdlib
// distributions do not guarantee that).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on the open interval (0, 1).
  double uniform01() {
    const std::uint64_t bits = engine_() >> 11;  // 53 random bits
    return (static_cast<double>(bits) + 0.5) * 0x1p-53;
  }

  // Uniform on the open interval (lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; no rejection, so draw count per sample
  // is fixed and the stream stays reproducible.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace kbsnmf
