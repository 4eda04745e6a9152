#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace culgen {

// SplitMix64. Every draw that is part of a documented contract (retrieval,
// noise, tau sampling, parameter init) goes through this generator so that
// independent re-implementations can replay the stream; see
// docs/determinism.md for the pinned sequence.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    return scramble(state_);
  }

  // next() % n. The modulo bias is ~n/2^64, irrelevant at the n this
  // project draws with, and keeps the stream trivially replayable.
  uint64_t bounded(uint64_t n) { return next() % n; }

  // 53-bit mantissa uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller pair; the second value is cached and returned by the next
  // call, so normals consume exactly one uniform pair per two draws.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // SplitMix64 output function; also used standalone for seed derivation
  // and the toy text encoder's token hashing.
  static uint64_t scramble(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stable per-index sub-seed (sample i of a run, example i of a dataset).
inline uint64_t derive_seed(uint64_t base, uint64_t index) {
  return SeededRng::scramble(base + (index + 1) * 0x9E3779B97F4A7C15ull);
}

// FNV-1a, used for token hashing and content-pure mock judges.
inline uint64_t fnv1a64(const void* data, size_t len) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace culgen
