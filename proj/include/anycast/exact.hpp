#pragma once

// Exact arithmetic helpers. The coupling factor beta_i = sum_j C(i, j) mu_j is
// evaluated as the correctly rounded value of the exact dot product, so that
// any other exact route to the same real number (e.g. the rational
// control-packet channel) reproduces it bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace anycast {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

/// Accumulates doubles without rounding error (Shewchuk non-overlapping
/// partials) and rounds the total once, half-way cases to even.
class ExactAccumulator {
 public:
  void add(double x) {
    std::size_t i = 0;
    for (double y : partials_) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[i++] = lo;
      x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
  }

  /// Adds a*b exactly, as the error-free pair (fl(a*b), residual).
  void add_product(double a, double b) {
    const double p = a * b;
    const double e = std::fma(a, b, -p);
    add(p);
    if (e != 0.0) add(e);
  }

  double rounded() const {
    std::size_t n = partials_.size();
    if (n == 0) return 0.0;
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials_[--n];
      hi = x + y;
      const double yr = hi - x;
      lo = y - yr;
      if (lo != 0.0) break;
    }
    // The loop stopped with lo lost to rounding; if the remaining partials
    // push in the same direction, lo was not a true tie and must round away.
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      const double yr = x - hi;
      if (y == yr) hi = x;
    }
    return hi;
  }

  void clear() noexcept { partials_.clear(); }

 private:
  std::vector<double> partials_;
};

/// Correctly rounded sum_k a[k] * b[k].
///
/// A compensated dot product (error-free products and running sums, with the
/// small residuals summed in ordinary arithmetic) is accepted when its error
/// bound cannot straddle a rounding boundary; otherwise the partials-based
/// exact sum decides. Subnormal products are not supported.
inline double exact_dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("exact_dot: length mismatch");
  const std::size_t n = a.size();
  double p = 0.0;
  double s = 0.0;
  double mag = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double h = a[k] * b[k];
    const double r = std::fma(a[k], b[k], -h);
    const double t = p + h;
    const double z = t - p;
    const double q = (p - (t - z)) + (h - z);
    p = t;
    s += q + r;
    mag += std::abs(q) + std::abs(r);
  }
  const double res = p + s;
  const double z = res - p;
  const double d = (p - (res - z)) + (s - z);
  const double bound = 4.0 * static_cast<double>(n + 2) * 0x1p-53 * mag;
  if (res != 0.0 && std::isfinite(res) && std::isfinite(mag)) {
    const double up = std::nextafter(res, std::numeric_limits<double>::infinity()) - res;
    const double down = res - std::nextafter(res, -std::numeric_limits<double>::infinity());
    const double half = 0.5 * std::min(up, down);
    if (half - std::abs(d) > 2.0 * bound) return res;
  }
  ExactAccumulator acc;
  for (std::size_t k = 0; k < a.size(); ++k) acc.add_product(a[k], b[k]);
  return acc.rounded();
}

/// The exact rational value of a finite double.
inline Rational to_rational(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("to_rational: non-finite value");
  if (v == 0.0) return Rational(0);
  int exp = 0;
  const double frac = std::frexp(std::abs(v), &exp);  // |v| = frac * 2^exp, frac in [0.5, 1)
  const auto mant = static_cast<std::int64_t>(std::ldexp(frac, 53));
  BigInt num(mant);
  BigInt den(1);
  const int shift = exp - 53;
  if (shift >= 0)
    num <<= shift;
  else
    den <<= -shift;
  Rational r(num, den);
  return v < 0 ? Rational(-r) : r;
}

/// Rounds a rational to the nearest double, ties to even. Results in the
/// subnormal range are not supported.
inline double to_double_rounded(const Rational& r) {
  BigInt p = boost::multiprecision::numerator(r);
  BigInt q = boost::multiprecision::denominator(r);
  if (p == 0) return 0.0;
  const bool negative = p < 0;
  if (negative) p = -p;

  const long e = static_cast<long>(boost::multiprecision::msb(p)) -
                 static_cast<long>(boost::multiprecision::msb(q));
  const long shift = 55 - e;  // quotient gets 55 or 56 significant bits
  if (shift >= 0)
    p <<= shift;
  else
    q <<= -shift;
  BigInt quo, rem;
  boost::multiprecision::divide_qr(p, q, quo, rem);

  const long bits = static_cast<long>(boost::multiprecision::msb(quo)) + 1;
  const long drop = bits - 53;
  BigInt mant = quo >> drop;
  const BigInt dropped = quo - (mant << drop);
  const BigInt half = BigInt(1) << (drop - 1);
  const bool sticky = rem != 0;
  if (dropped > half || (dropped == half && (sticky || boost::multiprecision::bit_test(mant, 0))))
    mant += 1;

  const double m = static_cast<double>(static_cast<std::uint64_t>(mant));
  const double v = std::ldexp(m, static_cast<int>(drop - shift));
  if (v != 0.0 && std::abs(v) < 2.2250738585072014e-308)
    throw std::range_error("to_double_rounded: subnormal result");
  return negative ? -v : v;
}

}  // namespace anycast
