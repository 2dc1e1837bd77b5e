#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace v2x_isac {

/// splitmix64 finalizer, used to derive independent seeds from counters.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Purpose tags for the child streams of one realization. Each consumer
/// draws from its own stream, so disabling one source of randomness never
/// shifts the draws of another.
enum class StreamTag : std::uint64_t {
  kScene = 1,
  kLos = 2,
  kFadingRadar = 3,
  kFadingComm = 4,
  kFadingInterference = 5,
};

/// Random stream with explicit variate transforms on top of mt19937_64,
/// whose output sequence is fixed by the standard. Results are therefore
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix64(seed)), engine_(key_) {}

  /// Counter-based substream for realization `index` of batch `seed`.
  static Rng substream(std::uint64_t seed, std::uint64_t index) {
    return Rng(seed ^ mix64(index + 0x51ED270B27A4C3D5ULL));
  }

  /// Child stream for one consumer inside a realization; depends only on
  /// the key of this stream, not on how many draws were already made.
  Rng child(StreamTag tag) const {
    return Rng(key_ ^ mix64(static_cast<std::uint64_t>(tag) * 0xD1B54A32D192ED03ULL));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  /// Standard normal (Box-Muller, second variate cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace v2x_isac
