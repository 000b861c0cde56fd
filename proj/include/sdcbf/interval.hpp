#ifndef SDCBF_INTERVAL_HPP
#define SDCBF_INTERVAL_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "sdcbf/errors.hpp"

namespace sdcbf {

// Closed interval [lo, hi] of reals.
//
// Results of operations on non-degenerate operands are widened outward by one
// ulp per endpoint so floating-point rounding cannot shrink the enclosure.
// Operations on point intervals are left unwidened: a point interval then
// reproduces the double evaluation of the same expression bit for bit.
class Interval {
 public:
  constexpr Interval() = default;
  constexpr Interval(double v) : lo_(v), hi_(v) {}  // NOLINT: implicit by design of scalar templates
  Interval(double lo, double hi) : lo_(lo), hi_(hi) {
    if (!(lo <= hi)) {
      throw IntervalError("interval with lo > hi or NaN endpoint");
    }
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double mid() const { return lo_ == hi_ ? lo_ : 0.5 * lo_ + 0.5 * hi_; }
  double rad() const { return 0.5 * (hi_ - lo_); }
  double width() const { return hi_ - lo_; }
  double mag() const { return std::max(std::abs(lo_), std::abs(hi_)); }
  bool is_point() const { return lo_ == hi_; }
  bool contains(double v) const { return lo_ <= v && v <= hi_; }
  bool contains(const Interval& o) const { return lo_ <= o.lo_ && o.hi_ <= hi_; }
  bool contains_zero() const { return lo_ <= 0.0 && 0.0 <= hi_; }

  Interval& operator+=(const Interval& o) { return *this = *this + o; }
  Interval& operator-=(const Interval& o) { return *this = *this - o; }
  Interval& operator*=(const Interval& o) { return *this = *this * o; }
  Interval& operator/=(const Interval& o) { return *this = *this / o; }

  // Operations with an exact zero are exact and skip the outward rounding.
  bool is_zero() const { return lo_ == 0.0 && hi_ == 0.0; }

  friend Interval operator+(const Interval& a, const Interval& b) {
    if (b.is_zero()) {
      return a;
    }
    if (a.is_zero()) {
      return b;
    }
    return widened(a.lo_ + b.lo_, a.hi_ + b.hi_, a.is_point() && b.is_point());
  }
  friend Interval operator-(const Interval& a, const Interval& b) {
    if (b.is_zero()) {
      return a;
    }
    return widened(a.lo_ - b.hi_, a.hi_ - b.lo_, a.is_point() && b.is_point());
  }
  friend Interval operator-(const Interval& a) { return Interval(-a.hi_, -a.lo_, Raw{}); }
  friend Interval operator*(const Interval& a, const Interval& b) {
    if (a.is_point() && b.is_point()) {
      return Interval(a.lo_ * b.lo_);
    }
    if ((a.is_zero() && std::isfinite(b.lo_) && std::isfinite(b.hi_)) ||
        (b.is_zero() && std::isfinite(a.lo_) && std::isfinite(a.hi_))) {
      return Interval(0.0);
    }
    const double p1 = a.lo_ * b.lo_;
    const double p2 = a.lo_ * b.hi_;
    const double p3 = a.hi_ * b.lo_;
    const double p4 = a.hi_ * b.hi_;
    return widened(std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4}), false);
  }
  friend Interval operator/(const Interval& a, const Interval& b) {
    if (b.contains_zero()) {
      throw IntervalError("interval division by an interval containing zero");
    }
    if (a.is_point() && b.is_point()) {
      return Interval(a.lo_ / b.lo_);
    }
    const double q1 = a.lo_ / b.lo_;
    const double q2 = a.lo_ / b.hi_;
    const double q3 = a.hi_ / b.lo_;
    const double q4 = a.hi_ / b.hi_;
    return widened(std::min({q1, q2, q3, q4}), std::max({q1, q2, q3, q4}), false);
  }

  friend bool operator==(const Interval& a, const Interval& b) = default;

  friend std::ostream& operator<<(std::ostream& os, const Interval& v) {
    return os << '[' << v.lo_ << ", " << v.hi_ << ']';
  }

  // Common part of two enclosures of the same quantity; both are sound, so
  // an empty overlap can only come from rounding and collapses to the nearer
  // endpoint.
  friend Interval intersect(const Interval& a, const Interval& b) {
    const double lo = std::max(a.lo_, b.lo_);
    const double hi = std::min(a.hi_, b.hi_);
    return lo <= hi ? Interval(lo, hi, Raw{}) : Interval(hi, lo, Raw{});
  }

  // Smallest interval containing both.
  friend Interval hull(const Interval& a, const Interval& b) {
    return Interval(std::min(a.lo_, b.lo_), std::max(a.hi_, b.hi_), Raw{});
  }

 private:
  struct Raw {};
  Interval(double lo, double hi, Raw) : lo_(lo), hi_(hi) {}

  static Interval widened(double lo, double hi, bool exact) {
    if (std::isnan(lo) || std::isnan(hi)) {
      throw IntervalError("interval operation produced NaN");
    }
    if (exact) {
      return Interval(lo, hi, Raw{});
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    return Interval(std::nextafter(lo, -inf), std::nextafter(hi, inf), Raw{});
  }

  friend Interval sqr(const Interval& a);
  friend Interval sqrt(const Interval& a);
  friend Interval sin(const Interval& a);
  friend Interval cos(const Interval& a);

  double lo_ = 0.0;
  double hi_ = 0.0;
};

// x*x with the dependency removed: [-1,1]^2 = [0,1], not [-1,1].
inline Interval sqr(const Interval& a) {
  if (a.is_point()) {
    return Interval(a.lo_ * a.lo_);
  }
  const double l2 = a.lo_ * a.lo_;
  const double h2 = a.hi_ * a.hi_;
  if (a.contains_zero()) {
    const Interval r = Interval::widened(0.0, std::max(l2, h2), false);
    return Interval(0.0, r.hi_, Interval::Raw{});
  }
  return Interval::widened(std::min(l2, h2), std::max(l2, h2), false);
}

inline Interval sqrt(const Interval& a) {
  if (a.lo_ < 0.0) {
    throw IntervalError("interval sqrt of negative range");
  }
  if (a.is_point()) {
    return Interval(std::sqrt(a.lo_));
  }
  const Interval r = Interval::widened(std::sqrt(a.lo_), std::sqrt(a.hi_), false);
  return Interval(std::max(r.lo_, 0.0), r.hi_, Interval::Raw{});
}

// sin over [lo, hi]: endpoint values plus any interior extremum at pi/2 + k*pi.
inline Interval sin(const Interval& a) {
  if (a.is_point()) {
    return Interval(std::sin(a.lo_));
  }
  if (a.width() >= 2.0 * std::numbers::pi) {
    return Interval(-1.0, 1.0);
  }
  double lo = std::min(std::sin(a.lo_), std::sin(a.hi_));
  double hi = std::max(std::sin(a.lo_), std::sin(a.hi_));
  // Maxima at pi/2 + 2k*pi, minima at -pi/2 + 2k*pi.
  const double two_pi = 2.0 * std::numbers::pi;
  const double k_max = std::ceil((a.lo_ - std::numbers::pi / 2.0) / two_pi);
  if (std::numbers::pi / 2.0 + k_max * two_pi <= a.hi_) {
    hi = 1.0;
  }
  const double k_min = std::ceil((a.lo_ + std::numbers::pi / 2.0) / two_pi);
  if (-std::numbers::pi / 2.0 + k_min * two_pi <= a.hi_) {
    lo = -1.0;
  }
  Interval r = Interval::widened(lo, hi, false);
  return Interval(std::max(r.lo_, -1.0), std::min(r.hi_, 1.0));
}

inline Interval cos(const Interval& a) {
  if (a.is_point()) {
    return Interval(std::cos(a.lo_));
  }
  if (a.width() >= 2.0 * std::numbers::pi) {
    return Interval(-1.0, 1.0);
  }
  double lo = std::min(std::cos(a.lo_), std::cos(a.hi_));
  double hi = std::max(std::cos(a.lo_), std::cos(a.hi_));
  const double two_pi = 2.0 * std::numbers::pi;
  // Maxima at 2k*pi, minima at pi + 2k*pi.
  const double k_max = std::ceil(a.lo_ / two_pi);
  if (k_max * two_pi <= a.hi_) {
    hi = 1.0;
  }
  const double k_min = std::ceil((a.lo_ - std::numbers::pi) / two_pi);
  if (std::numbers::pi + k_min * two_pi <= a.hi_) {
    lo = -1.0;
  }
  Interval r = Interval::widened(lo, hi, false);
  return Interval(std::max(r.lo_, -1.0), std::min(r.hi_, 1.0));
}

// Scalar overloads so model code templated on the scalar type can call sqr()
// unqualified for both double and Interval.
inline double sqr(double v) { return v * v; }

}  // namespace sdcbf

namespace Eigen {

template <>
struct NumTraits<sdcbf::Interval> : GenericNumTraits<sdcbf::Interval> {
  using Real = sdcbf::Interval;
  using NonInteger = sdcbf::Interval;
  using Nested = sdcbf::Interval;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2,
    AddCost = 4,
    MulCost = 8,
  };
  static inline int digits10() { return NumTraits<double>::digits10(); }
};

}  // namespace Eigen

#endif  // SDCBF_INTERVAL_HPP
