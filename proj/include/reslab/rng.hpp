#pragma once

#include <cmath>
#include <cstdint>

namespace reslab {

// Counter-based generator: output = mix64(key + counter * golden ratio).
// Purpose streams are derived by remixing the key with a stream id, never by
// advancing the counter, so draws on one stream leave every sibling stream
// untouched (e.g. adding leads must not reshuffle edge lengths).
// All arithmetic is exact 64-bit, so output is identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream_id = 0)
      : key_(mix(mix(seed + kGamma) ^ mix(stream_id + 0x1F123BB5ull))) {}

  // Independent stream with the same seed ancestry.
  Rng stream(std::uint64_t stream_id) const { return Rng(key_, stream_id); }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t mask = ~0ull;
    if ((n & (n - 1)) == 0) return next_u64() & (n - 1);
    int bits = 64;
    while ((n - 1) >> (bits - 1) == 0) --bits;
    mask = (bits == 64) ? ~0ull : ((1ull << bits) - 1);
    for (;;) {
      std::uint64_t x = next_u64() & mask;
      if (x < n) return x;
    }
  }

  // Standard normal via Box-Muller; the paired value is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Open interval (0,1) for the radial draw keeps log finite.
    double u = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    double v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace reslab
