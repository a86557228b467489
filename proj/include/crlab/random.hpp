#pragma once

#include <cmath>
#include <cstdint>

namespace crlab {

// Counter-based pseudo-random generator (splitmix64 output function over an
// incrementing counter). The i-th draw depends only on (key, i), so streams
// are reproducible across platforms and compilers; std::normal_distribution
// is deliberately avoided because its draw order is implementation-defined.
//
// Stream splitting: fork(id) derives an independent key from (key, id).
// Consumers document their draw order against this counter.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(mix(key ^ 0x9e3779b97f4a7c15ull)) {}

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ull); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; consumes two uniforms per pair and
  // caches the second value.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    // Guard log(0).
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Derives an independent generator for a named substream.
  CounterRng fork(std::uint64_t stream_id) const {
    CounterRng child(0);
    child.key_ = mix(key_ ^ mix(stream_id + 0x632be59bd9b4e019ull));
    return child;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives an independent seed for a named substream of `base`.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_id) {
  CounterRng rng(base ^ (0xa0761d6478bd642full * (stream_id + 1)));
  return rng.next_u64();
}

}  // namespace crlab
