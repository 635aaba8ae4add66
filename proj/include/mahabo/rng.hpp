#ifndef MAHABO_RNG_HPP
#define MAHABO_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace mahabo {

//! SplitMix64 mixing step; used to derive stream keys.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

//! Deterministic random stream with hierarchical derivation.
//!
//! A stream is identified by a 64-bit key. child(tag) derives an independent
//! stream from (key, tag) without touching this stream's state, so the draw
//! sequence of one consumer never shifts another's. All distributions are
//! generated from raw 64-bit words with fixed arithmetic, keeping trial
//! replays byte-identical across runs of the same binary.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key)
      : key_(key), gen_(splitmix64(key ^ 0x5bf03635ecf4a1d3ull)) {}

  RngStream child(std::uint64_t tag) const {
    return RngStream(splitmix64(key_ ^ splitmix64(tag + 0x9e3779b97f4a7c15ull)));
  }

  std::uint64_t key() const { return key_; }

  std::uint64_t raw() { return gen_(); }

  //! Uniform double in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  //! Standard normal via Box-Muller; no cached second value.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925287;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  //! Uniform integer in [0, n); n must be positive and small against 2^64.
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }

 private:
  std::uint64_t key_;
  std::mt19937_64 gen_;
};

}  // namespace mahabo

#endif  // MAHABO_RNG_HPP
