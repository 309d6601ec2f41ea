#ifndef LATLAB_RNG_HPP
#define LATLAB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace latlab {

// Deterministic random source.  std::mt19937_64 is fully specified by the
// standard; the distributions below are hand-rolled because the standard
// library distribution objects are implementation-defined and would break
// bit-identical replay across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1).
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t UniformInt(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  // Box-Muller; consumes two uniforms per pair, caches the second.
  double Normal(double mean, double stddev) {
    if (have_cached_) {
      have_cached_ = false;
      return mean + stddev * cached_;
    }
    double u1 = Uniform();
    double u2 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return mean + stddev * r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// FNV-1a, used to derive acoustic state ids from (word, position).
inline std::uint64_t Fnv1a(std::string_view s, std::uint64_t extra = 0) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  for (int i = 0; i < 8; ++i) {
    h ^= (extra >> (i * 8)) & 0xff;
    h *= 1099511628211ull;
  }
  return h;
}

// SplitMix64 finalizer.  FNV-1a is affine in a small trailing seed (hashes
// for consecutive `extra` values differ by a constant), which shows up as
// arithmetic structure once reduced modulo a small range; this breaks it.
inline std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace latlab

#endif  // LATLAB_RNG_HPP
