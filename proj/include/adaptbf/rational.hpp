#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>

namespace adaptbf {

// Exact rational arithmetic for all intra-step allocation math. Conservation
// invariants (budget exactness, record symmetry) are checked with equality,
// which floating point cannot provide.
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline std::int64_t floor_to_i64(const Rational& r) {
  BigInt q = numerator(r) / denominator(r);
  // cpp_int division truncates toward zero; fix up negatives.
  if (q * denominator(r) != numerator(r) && r < 0) {
    q -= 1;
  }
  return static_cast<std::int64_t>(q);
}

inline Rational frac(const Rational& r) { return r - floor_to_i64(r); }

}  // namespace adaptbf
