#ifndef SDCBF_BOX_HPP
#define SDCBF_BOX_HPP

#include <Eigen/Dense>

#include <string>

#include "sdcbf/errors.hpp"
#include "sdcbf/interval.hpp"

namespace sdcbf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IVector = Eigen::Matrix<Interval, Eigen::Dynamic, 1>;
using IMatrix = Eigen::Matrix<Interval, Eigen::Dynamic, Eigen::Dynamic>;

inline void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

// Axis-aligned box {x : lo <= x <= hi}.
class Box {
 public:
  Box() = default;
  Box(Vector lo, Vector hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    require_same_dim(lo_.size(), hi_.size(), "Box");
    for (Eigen::Index i = 0; i < lo_.size(); ++i) {
      if (!(lo_[i] <= hi_[i])) {
        throw DimensionError("Box: lo > hi (or NaN) on axis " + std::to_string(i));
      }
    }
  }

  static Box point(const Vector& x) { return Box(x, x); }
  static Box centered(const Vector& center, const Vector& radius) {
    return Box(center - radius.cwiseAbs(), center + radius.cwiseAbs());
  }
  // Symmetric box [-r, r] around the origin; the usual carrier of an
  // uncertainty set.
  static Box symmetric(const Vector& radius) {
    return centered(Vector::Zero(radius.size()), radius);
  }
  static Box from_intervals(const IVector& v) {
    Vector lo(v.size());
    Vector hi(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      lo[i] = v[i].lo();
      hi[i] = v[i].hi();
    }
    return Box(lo, hi);
  }

  Eigen::Index dim() const { return lo_.size(); }
  const Vector& lo() const { return lo_; }
  const Vector& hi() const { return hi_; }
  Vector mid() const { return 0.5 * (lo_ + hi_); }
  Vector radius() const { return 0.5 * (hi_ - lo_); }
  bool is_point() const { return lo_ == hi_; }

  Interval operator[](Eigen::Index i) const { return Interval(lo_[i], hi_[i]); }

  IVector intervals() const {
    IVector v(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) {
      v[i] = (*this)[i];
    }
    return v;
  }

  bool contains(const Vector& x, double tol = 0.0) const {
    require_same_dim(x.size(), dim(), "Box::contains");
    return ((x - lo_).array() >= -tol).all() && ((hi_ - x).array() >= -tol).all();
  }
  bool contains(const Box& o) const {
    return (o.lo_.array() >= lo_.array()).all() && (o.hi_.array() <= hi_.array()).all();
  }

  // Scale the radius about the midpoint.
  Box inflated(double factor) const { return centered(mid(), factor * radius()); }

  // Point at fractional coordinates s in [0,1]^n.
  Vector at(const Vector& s) const { return lo_ + (hi_ - lo_).cwiseProduct(s); }

 private:
  Vector lo_;
  Vector hi_;
};

// Minkowski sum.
inline Box box_sum(const Box& a, const Box& b) {
  require_same_dim(a.dim(), b.dim(), "box_sum");
  return Box(a.lo() + b.lo(), a.hi() + b.hi());
}

inline Box box_hull(const Box& a, const Box& b) {
  require_same_dim(a.dim(), b.dim(), "box_hull");
  return Box(a.lo().cwiseMin(b.lo()), a.hi().cwiseMax(b.hi()));
}

// Translate an uncertainty box to sit around a point: {x} + delta.
inline Box around(const Vector& x, const Box& delta) { return box_sum(Box::point(x), delta); }

// Tightest box containing the ellipsoid {x : (x-c)' P (x-c) <= level}.
// The half-width on axis i is sqrt(level * (P^-1)_ii).
inline Box ellipsoid_bounding_box(const Matrix& P, double level, const Vector& center) {
  require_same_dim(P.rows(), center.size(), "ellipsoid_bounding_box");
  const Matrix Pinv = P.inverse();
  Vector r(center.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    r[i] = std::sqrt(level * Pinv(i, i));
  }
  return Box::centered(center, r);
}

template <class T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

// Small helpers for mixed double/Interval linear algebra. Eigen's product
// kernels do not mix scalar types, and these sizes are tiny.
template <class T>
VecT<T> mat_vec(const Matrix& A, const VecT<T>& x) {
  require_same_dim(A.cols(), x.size(), "mat_vec");
  VecT<T> y(A.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    T acc = T(0.0);
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (A(i, j) != 0.0) {
        acc = acc + T(A(i, j)) * x[j];
      }
    }
    y[i] = acc;
  }
  return y;
}

// Row vector (given as a column) times point matrix: returns (r' M)'.
inline IVector row_times(const IVector& r, const Matrix& M) {
  require_same_dim(r.size(), M.rows(), "row_times");
  IVector y(M.cols());
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    Interval acc(0.0);
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      if (M(i, j) != 0.0) {
        acc = acc + r[i] * Interval(M(i, j));
      }
    }
    y[j] = acc;
  }
  return y;
}

inline Interval dot(const IVector& a, const IVector& b) {
  require_same_dim(a.size(), b.size(), "dot");
  Interval acc(0.0);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    acc = acc + a[i] * b[i];
  }
  return acc;
}

// r' G for an interval row r (as column) and interval matrix G.
inline IVector row_times(const IVector& r, const IMatrix& G) {
  require_same_dim(r.size(), G.rows(), "row_times");
  IVector y(G.cols());
  for (Eigen::Index j = 0; j < G.cols(); ++j) {
    Interval acc(0.0);
    for (Eigen::Index i = 0; i < G.rows(); ++i) {
      acc = acc + r[i] * G(i, j);
    }
    y[j] = acc;
  }
  return y;
}

}  // namespace sdcbf

#endif  // SDCBF_BOX_HPP
