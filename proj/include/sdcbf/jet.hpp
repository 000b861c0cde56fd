#ifndef SDCBF_JET_HPP
#define SDCBF_JET_HPP

#include <Eigen/Core>

#include <algorithm>
#include <array>

#include "sdcbf/box.hpp"
#include "sdcbf/interval.hpp"

namespace sdcbf {

// First-order forward-mode jet over intervals: an enclosure of a function's
// value and of its gradient over a box. Gradient entries beyond `n` are zero,
// so constants cost nothing.
class Jet {
 public:
  static constexpr int kMaxDim = 8;

  Jet() = default;
  Jet(double c) : v_(c) {}  // NOLINT: implicit so model code can write T(1.0)
  Jet(const Interval& c) : v_(c) {}  // NOLINT
  static Jet variable(const Interval& value, int index, int dim) {
    if (dim > kMaxDim || index < 0 || index >= dim) {
      throw DimensionError("Jet: dimension exceeds kMaxDim");
    }
    Jet j(value);
    j.n_ = dim;
    for (int i = 0; i < dim; ++i) {
      j.d_[i] = Interval(i == index ? 1.0 : 0.0);
    }
    return j;
  }

  const Interval& value() const { return v_; }
  Interval d(int i) const { return i < n_ ? d_[i] : Interval(0.0); }
  int dim() const { return n_; }

  friend Jet operator+(const Jet& a, const Jet& b) {
    Jet r(a.v_ + b.v_);
    r.n_ = std::max(a.n_, b.n_);
    for (int i = 0; i < r.n_; ++i) {
      r.d_[i] = a.d(i) + b.d(i);
    }
    return r;
  }
  friend Jet operator-(const Jet& a, const Jet& b) {
    Jet r(a.v_ - b.v_);
    r.n_ = std::max(a.n_, b.n_);
    for (int i = 0; i < r.n_; ++i) {
      r.d_[i] = a.d(i) - b.d(i);
    }
    return r;
  }
  friend Jet operator-(const Jet& a) { return a.scaled(Interval(-1.0), -a.v_); }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r(a.v_ * b.v_);
    r.n_ = std::max(a.n_, b.n_);
    for (int i = 0; i < r.n_; ++i) {
      r.d_[i] = a.d(i) * b.v_ + a.v_ * b.d(i);
    }
    return r;
  }
  friend Jet operator/(const Jet& a, const Jet& b) {
    const Interval q = a.v_ / b.v_;
    Jet r(q);
    r.n_ = std::max(a.n_, b.n_);
    for (int i = 0; i < r.n_; ++i) {
      r.d_[i] = (a.d(i) - q * b.d(i)) / b.v_;
    }
    return r;
  }
  Jet& operator+=(const Jet& o) { return *this = *this + o; }
  Jet& operator-=(const Jet& o) { return *this = *this - o; }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
  Jet& operator/=(const Jet& o) { return *this = *this / o; }

  friend Jet sin(const Jet& a) { return a.scaled(cos(a.v_), sin(a.v_)); }
  friend Jet cos(const Jet& a) { return a.scaled(-sin(a.v_), cos(a.v_)); }
  friend Jet sqr(const Jet& a) { return a.scaled(Interval(2.0) * a.v_, sqr(a.v_)); }
  friend Jet sqrt(const Jet& a) {
    const Interval s = sqrt(a.v_);
    return a.scaled(Interval(0.5) / s, s);
  }

 private:
  // Chain rule for a unary function with derivative enclosure `slope`.
  Jet scaled(const Interval& slope, const Interval& value) const {
    Jet r(value);
    r.n_ = n_;
    for (int i = 0; i < n_; ++i) {
      r.d_[i] = slope * d_[i];
    }
    return r;
  }

  Interval v_{0.0};
  std::array<Interval, kMaxDim> d_{};
  int n_ = 0;
};

}  // namespace sdcbf

namespace Eigen {

template <>
struct NumTraits<sdcbf::Jet> : GenericNumTraits<sdcbf::Jet> {
  using Real = sdcbf::Jet;
  using NonInteger = sdcbf::Jet;
  using Nested = sdcbf::Jet;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 16,
    AddCost = 32,
    MulCost = 64,
  };
  static inline int digits10() { return NumTraits<double>::digits10(); }
};

}  // namespace Eigen

namespace sdcbf {

template <class M>
concept JetDifferentiable = requires(const M& m, const VecT<Jet>& x) {
  { m.drift(x) } -> std::convertible_to<VecT<Jet>>;
};

// Interval enclosure of the drift Jacobian over a box.
template <class M>
  requires JetDifferentiable<M>
IMatrix interval_jacobian(const M& model, const Box& box) {
  const auto n = static_cast<int>(box.dim());
  VecT<Jet> x(n);
  for (int i = 0; i < n; ++i) {
    x[i] = Jet::variable(box[i], i, n);
  }
  const VecT<Jet> f = model.drift(x);
  IMatrix J(f.size(), n);
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    for (int j = 0; j < n; ++j) {
      J(i, j) = f[i].d(j);
    }
  }
  return J;
}

}  // namespace sdcbf

#endif  // SDCBF_JET_HPP
