#ifndef MAHABO_SOBOL_HPP
#define MAHABO_SOBOL_HPP

#include <bit>
#include <cstdint>
#include <vector>

#include "mahabo/box_domain.hpp"
#include "mahabo/rng.hpp"
#include "mahabo/types.hpp"

namespace mahabo {

namespace detail {

// GF(2) polynomial arithmetic on bit-packed coefficients.
inline std::uint64_t gf2_mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t p, int deg) {
  std::uint64_t r = 0;
  while (b) {
    if (b & 1u) r ^= a;
    b >>= 1;
    a <<= 1;
    if (a & (std::uint64_t(1) << deg)) a ^= p;
  }
  return r;
}

inline std::uint64_t gf2_powmod(std::uint64_t base, std::uint64_t e, std::uint64_t p, int deg) {
  std::uint64_t r = 1;
  while (e) {
    if (e & 1u) r = gf2_mulmod(r, base, p, deg);
    base = gf2_mulmod(base, base, p, deg);
    e >>= 1;
  }
  return r;
}

inline std::vector<std::uint64_t> prime_factors(std::uint64_t n) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t q = 2; q * q <= n; ++q) {
    if (n % q == 0) {
      out.push_back(q);
      while (n % q == 0) n /= q;
    }
  }
  if (n > 1) out.push_back(n);
  return out;
}

//! p (degree m, bit i = coefficient of x^i) is primitive over GF(2) iff the
//! multiplicative order of x modulo p is exactly 2^m - 1.
inline bool is_primitive_gf2(std::uint64_t p, int m) {
  const std::uint64_t order = (std::uint64_t(1) << m) - 1;
  if (gf2_powmod(2, order, p, m) != 1) return false;
  for (std::uint64_t q : prime_factors(order))
    if (gf2_powmod(2, order / q, p, m) == 1) return false;
  return true;
}

//! First `count` primitive polynomials over GF(2), ordered by degree then by
//! numeric value. Starts with x + 1 (0b11).
inline std::vector<std::uint32_t> primitive_polynomials(std::size_t count) {
  std::vector<std::uint32_t> polys;
  polys.reserve(count);
  for (int m = 1; polys.size() < count && m < 32; ++m) {
    const std::uint64_t hi = std::uint64_t(1) << m;
    // odd constant term required
    for (std::uint64_t p = hi + 1; p < 2 * hi && polys.size() < count; p += 2)
      if (is_primitive_gf2(p, m)) polys.push_back(static_cast<std::uint32_t>(p));
  }
  return polys;
}

}  // namespace detail

//! Unscrambled Sobol sequence in Gray-code order with 32-bit precision.
//!
//! Dimension 1 is the base-2 van der Corput sequence. Higher dimensions use
//! successive primitive polynomials over GF(2); the free initial direction
//! numbers are odd integers derived deterministically from the dimension
//! index, so the sequence is identical across runs and platforms. Index 0 of
//! the raw sequence is the zero point and is skipped: next() first returns
//! point 1, the all-halves point.
class SobolSequence {
 public:
  explicit SobolSequence(Index dim) : dim_(dim), state_(dim, 0), counter_(0) {
    require(dim >= 1, "SobolSequence: dimension must be positive");
    direction_.assign(static_cast<std::size_t>(dim) * kBits, 0);

    // dimension 0: m_k = 1 for all k
    for (int k = 0; k < kBits; ++k) dir(0, k) = std::uint32_t(1) << (31 - k);

    const auto polys = detail::primitive_polynomials(dim >= 2 ? dim - 1 : 0);
    for (Index j = 1; j < dim; ++j) {
      const std::uint32_t poly = polys[j - 1];
      const int s = 31 - std::countl_zero(poly);  // degree
      for (int k = 0; k < s && k < kBits; ++k) {
        const std::uint32_t m = initial_direction_number(j, k + 1);
        dir(j, k) = m << (31 - k);
      }
      for (int k = s; k < kBits; ++k) {
        std::uint32_t v = dir(j, k - s);
        v ^= v >> s;
        for (int i = 1; i < s; ++i)
          if ((poly >> (s - i)) & 1u) v ^= dir(j, k - i);
        dir(j, k) = v;
      }
    }
  }

  Index dim() const { return dim_; }

  //! Jump so that the following next() returns point index n + 1.
  void seek(std::uint64_t n) {
    counter_ = n;
    const std::uint64_t gray = n ^ (n >> 1);
    for (Index j = 0; j < dim_; ++j) {
      std::uint32_t st = 0;
      for (int b = 0; b < kBits; ++b)
        if ((gray >> b) & 1u) st ^= dir(j, b);
      state_[j] = st;
    }
  }

  //! Next point of the sequence, coordinates in [0, 1).
  Eigen::VectorXd next() {
    ++counter_;
    const int b = std::countr_zero(counter_);
    Eigen::VectorXd p(dim_);
    for (Index j = 0; j < dim_; ++j) {
      state_[j] ^= dir(j, b);
      p[j] = static_cast<double>(state_[j]) * 0x1.0p-32;
    }
    return p;
  }

 private:
  static constexpr int kBits = 32;

  std::uint32_t& dir(Index j, int k) { return direction_[static_cast<std::size_t>(j) * kBits + k]; }
  std::uint32_t dir(Index j, int k) const {
    return direction_[static_cast<std::size_t>(j) * kBits + k];
  }

  //! Odd m_k < 2^k, fixed by (dimension, k) alone.
  static std::uint32_t initial_direction_number(Index j, int k) {
    if (k == 1) return 1;
    const std::uint64_t h =
        splitmix64(0x536f626f6cull ^ (static_cast<std::uint64_t>(j) << 16) ^
                   static_cast<std::uint64_t>(k));
    return static_cast<std::uint32_t>(2 * (h % (std::uint64_t(1) << (k - 1))) + 1);
  }

  Index dim_;
  std::vector<std::uint32_t> direction_;
  std::vector<std::uint32_t> state_;
  std::uint64_t counter_;
};

//! First n points of the Sobol sequence scaled to the box, one row per
//! point. seed shifts the starting index (seed 0 starts at the all-halves
//! point); identical inputs always produce identical point sets.
template <typename Scalar>
MatrixX<Scalar> sobol_init(const BoxDomain<Scalar>& domain, Index n, std::uint64_t seed) {
  require(n >= 1, "sobol_init: n must be positive");
  SobolSequence seq(domain.dim());
  seq.seek(seed);
  MatrixX<Scalar> out(n, domain.dim());
  const VectorX<Scalar> lo = domain.lower();
  const VectorX<Scalar> width = domain.upper() - domain.lower();
  for (Index i = 0; i < n; ++i) {
    const Eigen::VectorXd u = seq.next();
    out.row(i) = (lo.array() + width.array() * u.array().template cast<Scalar>()).transpose();
  }
  return out;
}

}  // namespace mahabo

#endif  // MAHABO_SOBOL_HPP
