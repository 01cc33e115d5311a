#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace ewod {

// Deterministic counter-based RNG (splitmix64 core). All randomness in the
// toolkit flows from one u64 seed through named streams, so subsystems stay
// independent of each other and of call order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Derive an independent stream keyed by name (and an optional index).
  Rng stream(std::string_view name, std::uint64_t index = 0) const {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (char c : name) {
      h ^= static_cast<std::uint8_t>(c);
      h *= 0x100000001b3ull;
    }
    h ^= index + 0x9e3779b97f4a7c15ull;
    return Rng(mix(state_ ^ mix(h)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller (fixed algorithm, reproducible everywhere).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ewod
