// util.hpp — small shared helpers: stable hashing, a deterministic RNG with
// hand-rolled distributions (std:: distributions vary across standard
// libraries, which would break byte-identical fixtures), and formatting.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace scbu {

// FNV-1a, 64-bit. Used for prompt hashes and fixture keys.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string to_hex(std::uint64_t value);

// "[mm:ss]" with floor-to-second.
std::string format_timestamp(double seconds);

// Fixed-decimal formatting ("%.3f" etc.) for deterministic text output.
std::string format_fixed(double value, int decimals);

std::string lowercase(std::string_view s);

// Deterministic PRNG: xoshiro-free, single splitmix64 stream plus explicit
// distribution algorithms so output is reproducible across runs and builds.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);

  bool bernoulli(double p) { return uniform01() < p; }

  // Box-Muller; the spare value is cached.
  double normal(double mean, double stddev);

  // Normal clamped to [lo, hi].
  double normal_clamped(double mean, double stddev, double lo, double hi);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Round to a fixed number of decimals; generated fixtures are rounded so the
// serialized form stays short and diffs cleanly.
inline double round_decimals(double value, int decimals) {
  double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

}  // namespace scbu
