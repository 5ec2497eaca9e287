#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gridrel {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Reproducible random stream addressed by (seed, stream, counter).
///
/// Distinct addresses hash to unrelated engine seeds, so workers and
/// benchmark cells can each own a stream without coordination. Uniform and
/// normal variates are produced by explicit transforms (not the
/// implementation-defined std distributions) so a given address yields the
/// same sequence with every standard library.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0,
                        std::uint64_t counter = 0)
      : engine_(splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0, v = 0.0, s = 0.0;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

  /// Child stream; children of one parent with distinct ids are independent.
  RandomStream split(std::uint64_t id) { return RandomStream(next(), id); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gridrel
