#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

#include "shiftlab/rational.hpp"

namespace shiftlab {

// Composite decay bound: a = 256|D|^14|R|^7, c = 1/(8|D|^3|R|),
// b = (1 - ell^{-|D|})^c, product = a^2 |M|^14 b^{|M|}. The verdict
// (product < 1) is decided in exact integer arithmetic by raising both sides
// to the denominator of c|M|; the decimal rendering is display-only.
struct BoundReport {
  std::uint64_t ell = 0;
  std::uint64_t d_size = 0;
  std::uint64_t r_size = 0;
  std::uint64_t m_size = 0;
  Int a;
  Rat c;
  Rat base;  // 1 - ell^{-|D|}; b = base^c
  bool product_below_one = false;
  std::string product_decimal;  // display only
  std::uint64_t threshold = 0;  // minimal |M| with product < 1
};

namespace detail {

inline void require_bound_args(std::uint64_t ell, std::uint64_t d_size, std::uint64_t r_size) {
  if (ell < 2 || d_size < 1 || r_size < 1)
    throw std::domain_error("bound report needs ell >= 2 and nonempty D, R");
}

}  // namespace detail

// Exact verdict for a^2 |M|^14 base^{c|M|} < 1.
inline bool bound_product_below_one(std::uint64_t ell, std::uint64_t d_size,
                                    std::uint64_t r_size, std::uint64_t m_size) {
  detail::require_bound_args(ell, d_size, r_size);
  if (m_size < 1) throw std::domain_error("bound report needs |M| >= 1");
  Int a = 256 * ipow(Int(d_size), 14) * ipow(Int(r_size), 7);
  Rat base = Rat(ipow(Int(ell), d_size) - 1, ipow(Int(ell), d_size));
  std::uint64_t v = 8 * d_size * d_size * d_size * r_size;
  std::uint64_t u = m_size;
  std::uint64_t g = std::gcd(u, v);
  u /= g;
  v /= g;
  // product < 1  <=>  base^u * (a^2 |M|^14)^v < 1
  Int poly = a * a * ipow(Int(m_size), 14);
  return rpow(base, u) * Rat(ipow(poly, v)) < 1;
}

inline BoundReport bound_report(std::uint64_t ell, std::uint64_t d_size, std::uint64_t r_size,
                                std::uint64_t m_size) {
  detail::require_bound_args(ell, d_size, r_size);
  if (m_size < 1) throw std::domain_error("bound report needs |M| >= 1");
  BoundReport out;
  out.ell = ell;
  out.d_size = d_size;
  out.r_size = r_size;
  out.m_size = m_size;
  out.a = 256 * ipow(Int(d_size), 14) * ipow(Int(r_size), 7);
  out.c = Rat(1, Int(8) * ipow(Int(d_size), 3) * Int(r_size));
  out.base = Rat(ipow(Int(ell), d_size) - 1, ipow(Int(ell), d_size));
  out.product_below_one = bound_product_below_one(ell, d_size, r_size, m_size);

  {
    // display rendering of a^2 |M|^14 base^{c|M|} through logarithms
    Float100 log_product = 2 * log(Float100(out.a)) + 14 * log(Float100(m_size)) +
                           Float100(m_size) * Float100(out.c) * log(Float100(out.base));
    out.product_decimal = exp(log_product).str(30);
  }

  // the below-one region is a tail interval: doubling finds a member, then
  // bisection pins its least element
  std::uint64_t hi = 1;
  while (!bound_product_below_one(ell, d_size, r_size, hi)) {
    if (hi > (1ull << 48)) throw std::logic_error("bound threshold search ran away");
    hi *= 2;
  }
  std::uint64_t lo = hi / 2;  // product >= 1 here (or hi == 1)
  while (hi - lo > 1 && lo >= 1) {
    std::uint64_t mid = lo + (hi - lo) / 2;
    if (bound_product_below_one(ell, d_size, r_size, mid))
      hi = mid;
    else
      lo = mid;
  }
  out.threshold = hi;
  if (!bound_product_below_one(ell, d_size, r_size, out.threshold))
    throw std::logic_error("bound threshold fails its own check");
  if (out.threshold > 1 && bound_product_below_one(ell, d_size, r_size, out.threshold - 1))
    throw std::logic_error("bound threshold is not minimal");
  return out;
}

}  // namespace shiftlab
