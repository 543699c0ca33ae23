#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace conpatch {

// Counter-based generator: every draw is a pure function of (seed, stream,
// counter), so results never depend on call order or thread count.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return splitmix64(splitmix64(seed ^ splitmix64(stream)) + counter);
}

/// Uniform in (0, 1), never exactly 0.
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return (static_cast<double>(counter_hash(seed, stream, counter) >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on the counter pair (2n, 2n+1).
inline double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t n) {
  const double u1 = counter_uniform(seed, stream, 2 * n);
  const double u2 = counter_uniform(seed, stream, 2 * n + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Uniform integer in [0, bound) by rejection-free multiply-shift.
inline std::uint64_t counter_below(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
                                   std::uint64_t bound) {
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(counter_hash(seed, stream, counter)) * bound;
  return static_cast<std::uint64_t>(wide >> 64);
}

/// Small sequential wrapper for code that just needs a stream of draws.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
  double uniform() { return counter_uniform(seed_, stream_, next_++); }
  double normal() { return counter_normal(seed_, stream_ ^ 0x6E6F726D616CULL, next_++); }
  std::uint64_t below(std::uint64_t bound) { return counter_below(seed_, stream_, next_++, bound); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t next_ = 0;
};

}  // namespace conpatch
