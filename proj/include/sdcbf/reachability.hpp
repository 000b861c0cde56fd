#ifndef SDCBF_REACHABILITY_HPP
#define SDCBF_REACHABILITY_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "sdcbf/box.hpp"
#include "sdcbf/dynamics.hpp"
#include "sdcbf/interval.hpp"

namespace sdcbf {

// Enclose fn over a box by evaluating it with interval scalars. fn must be
// written generically in its scalar type (the models and barriers in this
// library are).
template <class Fn>
auto interval_eval(const Fn& fn, const Box& box) {
  return fn(box.intervals());
}

// Interval image of f(X) + g(X) U.
template <ControlAffineModel M>
IVector interval_vector_field(const M& model, const Box& states, const Box& inputs) {
  require_same_dim(states.dim(), model.state_dim(), "interval_vector_field states");
  require_same_dim(inputs.dim(), model.input_dim(), "interval_vector_field inputs");
  const IVector X = states.intervals();
  const IVector U = inputs.intervals();
  IVector F = model.drift(X);
  const IMatrix G = model.input_matrix(X);
  for (Eigen::Index i = 0; i < F.size(); ++i) {
    for (Eigen::Index j = 0; j < U.size(); ++j) {
      F[i] += G(i, j) * U[j];
    }
  }
  return F;
}

template <ControlAffineModel M>
Box input_box(const M& model) {
  return Box::symmetric(model.input_bound());
}

struct ReachOptions {
  double inflation = 1.1;
  int max_iterations = 20;
  // When one Picard step over [0, dt] does not contract, [0, dt] is split
  // into 2, 4, ... pieces (up to this many) chained box to box.
  int max_pieces = 64;
};

namespace detail {

// Enclosure of every state reachable from `start` within [0, h]: a box Y
// with start + [0,h] F(Y) inside Y. Also returns the box holding the states
// at exactly h, start + h F(Y).
struct PieceEnclosure {
  Box all;
  Box end;
};

template <ControlAffineModel M>
std::optional<PieceEnclosure> picard_piece(const M& model, const Box& start, double h,
                                           const Box& inputs, const ReachOptions& opts) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const Interval span(0.0, h);
  auto image = [&](const IVector& F, const Interval& t) {
    Vector lo = start.lo();
    Vector hi = start.hi();
    for (Eigen::Index i = 0; i < F.size(); ++i) {
      if (F[i].is_point() && F[i].lo() == 0.0) {
        continue;  // this coordinate cannot move
      }
      const Interval step = t * F[i];
      if (step.lo() < 0.0) {
        lo[i] = std::nextafter(lo[i] + step.lo(), -inf);
      }
      if (step.hi() > 0.0) {
        hi[i] = std::nextafter(hi[i] + step.hi(), inf);
      }
    }
    return Box(lo, hi);
  };
  Box X = start;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const IVector F = interval_vector_field(model, X, inputs);
    for (Eigen::Index i = 0; i < F.size(); ++i) {
      if (!std::isfinite(F[i].lo()) || !std::isfinite(F[i].hi())) {
        return std::nullopt;
      }
    }
    const Box Y = image(F, span);
    if (X.contains(Y)) {
      return PieceEnclosure{Y, image(F, Interval(h))};
    }
    // Next candidate: the image, inflated, never smaller than the current one.
    X = box_hull(Y.inflated(opts.inflation), X);
  }
  return std::nullopt;
}

}  // namespace detail

// Over-approximation of every state reachable from x0 within [0, dt] under
// any input in `inputs`. Picard enclosure: find X with x0 + [0,dt] F(X)
// inside X; then the flow stays in X and hence in x0 + [0,dt] F(X), which is
// returned. Stiff dynamics get the same construction on sub-intervals.
template <ControlAffineModel M>
Box reachable_box(const M& model, const Vector& x0, double dt, const Box& inputs,
                  const ReachOptions& opts = {}) {
  if (!(dt >= 0.0)) {
    throw EnclosureError("reachable_box: dt must be non-negative");
  }
  require_same_dim(x0.size(), model.state_dim(), "reachable_box");
  for (int pieces = 1; pieces <= std::max(1, opts.max_pieces); pieces *= 2) {
    const double h = dt / pieces;
    Box start = Box::point(x0);
    Box hull = start;
    bool ok = true;
    for (int j = 0; j < pieces && ok; ++j) {
      const auto piece = detail::picard_piece(model, start, h, inputs, opts);
      if (!piece) {
        ok = false;
        break;
      }
      hull = box_hull(hull, piece->all);
      start = piece->end;
    }
    if (ok) {
      return hull;
    }
  }
  throw EnclosureError("reachable_box: Picard enclosure did not contract in " +
                       std::to_string(opts.max_iterations) + " iterations on up to " +
                       std::to_string(opts.max_pieces) + " sub-intervals (dt " +
                       std::to_string(dt) + " too large for the local dynamics)");
}

template <ControlAffineModel M>
Box reachable_box(const M& model, const Vector& x0, double dt, const ReachOptions& opts = {}) {
  return reachable_box(model, x0, dt, input_box(model), opts);
}

}  // namespace sdcbf

#endif  // SDCBF_REACHABILITY_HPP
