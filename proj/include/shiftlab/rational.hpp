#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace shiftlab {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;
using Float100 = boost::multiprecision::cpp_bin_float_100;

inline Int ipow(Int base, std::uint64_t e) {
  Int r = 1;
  while (e) {
    if (e & 1) r *= base;
    base *= base;
    e >>= 1;
  }
  return r;
}

inline Rat rpow(const Rat& base, std::uint64_t e) {
  return Rat(ipow(numerator(base), e), ipow(denominator(base), e));
}

inline Int lcm_upto(std::uint64_t n) {
  Int l = 1;
  for (std::uint64_t i = 2; i <= n; ++i) l = boost::multiprecision::lcm(l, Int(i));
  return l;
}

inline std::string rat_string(const Rat& q) {
  std::string s = numerator(q).str();
  if (denominator(q) != 1) s += "/" + denominator(q).str();
  return s;
}

// Fixed-precision decimal rendering, round-to-nearest; used for report display
// only, never for verdicts.
inline std::string decimal_string(const Rat& q, int digits = 12) {
  Float100 f = Float100(numerator(q)) / Float100(denominator(q));
  return f.str(digits);
}

}  // namespace shiftlab
