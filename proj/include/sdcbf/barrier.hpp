#ifndef SDCBF_BARRIER_HPP
#define SDCBF_BARRIER_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "sdcbf/box.hpp"
#include "sdcbf/dynamics.hpp"
#include "sdcbf/jet.hpp"
#include "sdcbf/reachability.hpp"
#include "sdcbf/sensitivity.hpp"

namespace sdcbf {

// h(x) = offset + w'(x - c) - (x - c)' W (x - c), W symmetric.
//
// Covers both barriers the Segway needs: the position corridor
// 1 - (p / p_max)^2 and the Lyapunov level set eps - x' P x. The interval
// evaluation squares diagonal terms with sqr() so a corridor evaluated over a
// box straddling the center stays tight.
class QuadraticBarrier {
 public:
  QuadraticBarrier() = default;
  QuadraticBarrier(double offset, Vector linear, Matrix quadratic, Vector center)
      : offset_(offset),
        linear_(std::move(linear)),
        quadratic_(std::move(quadratic)),
        center_(std::move(center)) {
    require_same_dim(linear_.size(), center_.size(), "QuadraticBarrier linear");
    require_same_dim(quadratic_.rows(), center_.size(), "QuadraticBarrier quadratic");
    require_same_dim(quadratic_.cols(), center_.size(), "QuadraticBarrier quadratic");
    quadratic_ = 0.5 * (quadratic_ + quadratic_.transpose()).eval();
  }

  // 1 - (x_axis / half_width)^2.
  static QuadraticBarrier corridor(Eigen::Index dim, Eigen::Index axis, double half_width) {
    Matrix W = Matrix::Zero(dim, dim);
    W(axis, axis) = 1.0 / (half_width * half_width);
    return QuadraticBarrier(1.0, Vector::Zero(dim), W, Vector::Zero(dim));
  }
  // level - (x - center)' P (x - center).
  static QuadraticBarrier ellipsoid(const Matrix& P, double level, const Vector& center) {
    return QuadraticBarrier(level, Vector::Zero(center.size()), P, center);
  }
  static QuadraticBarrier affine(double offset, const Vector& linear) {
    const auto n = linear.size();
    return QuadraticBarrier(offset, linear, Matrix::Zero(n, n), Vector::Zero(n));
  }

  Eigen::Index dim() const { return center_.size(); }
  double offset() const { return offset_; }
  const Vector& linear() const { return linear_; }
  const Matrix& quadratic() const { return quadratic_; }
  const Vector& center() const { return center_; }

  template <class T>
  T value(const VecT<T>& x) const {
    require_same_dim(x.size(), dim(), "QuadraticBarrier::value");
    const auto n = dim();
    VecT<T> d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      d[i] = x[i] - T(center_[i]);
    }
    T lin = T(0.0);
    T quad = T(0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (linear_[i] != 0.0) {
        lin = lin + T(linear_[i]) * d[i];
      }
      if (quadratic_(i, i) != 0.0) {
        quad = quad + T(quadratic_(i, i)) * sqr(d[i]);
      }
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (quadratic_(i, j) != 0.0) {
          quad = quad + T(2.0 * quadratic_(i, j)) * (d[i] * d[j]);
        }
      }
    }
    return T(offset_) + lin - quad;
  }

  double operator()(const Vector& x) const { return value<double>(x); }

  template <class T>
  VecT<T> gradient(const VecT<T>& x) const {
    require_same_dim(x.size(), dim(), "QuadraticBarrier::gradient");
    const auto n = dim();
    VecT<T> d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      d[i] = x[i] - T(center_[i]);
    }
    VecT<T> g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      T acc = T(linear_[i]);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (quadratic_(i, j) != 0.0) {
          acc = acc - T(2.0 * quadratic_(i, j)) * d[j];
        }
      }
      g[i] = acc;
    }
    return g;
  }

 private:
  double offset_ = 0.0;
  Vector linear_;
  Matrix quadratic_;
  Vector center_;
};

// Safe set {h >= 0}, backup set {h_B >= 0}, backup horizon and the linear
// class-K gain.
struct SafetySpec {
  QuadraticBarrier safe;
  QuadraticBarrier backup_set;
  double horizon = 2.0;  // s
  double lambda = 1.0;   // 1/s
  std::size_t points = 10;
};

// Extended class-K function alpha(h) = lambda * h.
inline double alpha(double h_val, double lambda) { return lambda * h_val; }
inline Interval alpha(const Interval& h_val, double lambda) { return Interval(lambda) * h_val; }

// Backup law for the plant with pre-feedback xdot = f + g (u + K x). The
// pre-feedback K acts continuously inside the plant; the sampled (ZOH) part
// is the nominal gain. operator() is that sampled part, sat(G (x - x_eq));
// combined() is the total demand sat((G + K)(x - x_eq)) on the bare plant.
class BackupController {
 public:
  BackupController() = default;
  BackupController(Matrix nominal_gain, Matrix prefeedback_gain, Vector equilibrium, Vector u_max)
      : nominal_(std::move(nominal_gain)),
        prefeedback_(std::move(prefeedback_gain)),
        equilibrium_(std::move(equilibrium)),
        u_max_(std::move(u_max)) {
    require_same_dim(nominal_.rows(), u_max_.size(), "BackupController nominal gain");
    require_same_dim(prefeedback_.rows(), u_max_.size(), "BackupController pre-feedback");
    require_same_dim(nominal_.cols(), equilibrium_.size(), "BackupController nominal gain");
    require_same_dim(prefeedback_.cols(), equilibrium_.size(), "BackupController pre-feedback");
  }

  Vector operator()(const Vector& x) const {
    return saturate(nominal_ * (x - equilibrium_), u_max_);
  }
  Vector combined(const Vector& x) const {
    const Vector e = x - equilibrium_;
    return saturate(nominal_ * e + prefeedback_ * e, u_max_);
  }

  Matrix total_gain() const { return nominal_ + prefeedback_; }
  const Matrix& nominal_gain() const { return nominal_; }
  const Matrix& prefeedback_gain() const { return prefeedback_; }
  const Vector& equilibrium() const { return equilibrium_; }
  const Vector& input_bound() const { return u_max_; }

 private:
  Matrix nominal_;
  Matrix prefeedback_;
  Vector equilibrium_;
  Vector u_max_;
};

inline std::size_t horizon_steps(double horizon, double dt) {
  if (!(dt > 0.0) || !(horizon >= 0.0)) {
    throw IntegrationError("horizon_steps: need dt > 0 and horizon >= 0");
  }
  const double ratio = horizon / dt;
  const double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio)) {
    throw IntegrationError("backup horizon " + std::to_string(horizon) +
                           " s is not a multiple of dt " + std::to_string(dt) + " s");
  }
  return static_cast<std::size_t>(steps);
}

struct Membership {
  bool inside = false;
  // min over h(phi_i) for all samples and h_B(phi_T).
  double margin = -std::numeric_limits<double>::infinity();
  // First sample with h < 0, or steps()+1 if the terminal h_B failed, or
  // npos when inside.
  std::size_t first_violation = npos;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

// Membership in the implicit set under the sampled backup flow.
inline Membership membership(const Trajectory& backup_flow, const SafetySpec& spec) {
  Membership m;
  m.margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < backup_flow.states.size(); ++i) {
    const double h = spec.safe(backup_flow.states[i]);
    m.margin = std::min(m.margin, h);
    if (h < 0.0 && m.first_violation == Membership::npos) {
      m.first_violation = i;
    }
  }
  const double hb = spec.backup_set(backup_flow.terminal());
  m.margin = std::min(m.margin, hb);
  if (hb < 0.0 && m.first_violation == Membership::npos) {
    m.first_violation = backup_flow.states.size();
  }
  m.inside = m.first_violation == Membership::npos;
  return m;
}

template <ControlAffineModel M>
Membership membership(const M& model, const Vector& x0, const SafetySpec& spec,
                      const BackupController& backup, double dt, int substeps = 1) {
  const std::size_t steps = horizon_steps(spec.horizon, dt);
  if (steps == 0) {
    Trajectory t;
    t.dt = dt;
    t.states.push_back(x0);
    return membership(t, spec);
  }
  return membership(simulate_zoh(model, x0, backup, dt, steps, substeps), spec);
}

struct PointSelection {
  // Ascending step indices carrying an h constraint.
  std::vector<std::size_t> safe_points;
  // Index carrying the h_B constraint (always the last sample).
  std::size_t terminal = 0;
};

// The k samples with the smallest h along the backup flow (ties broken by the
// smaller index), plus the terminal sample for h_B.
inline PointSelection select_points(const Trajectory& backup_flow, const SafetySpec& spec,
                                    std::size_t k) {
  if (k < 1) {
    throw DimensionError("select_points: k must be >= 1");
  }
  const std::size_t count = backup_flow.states.size();
  std::vector<double> h(count);
  for (std::size_t i = 0; i < count; ++i) {
    h[i] = spec.safe(backup_flow.states[i]);
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t keep = std::min(k, count);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return h[a] < h[b] || (h[a] == h[b] && a < b);
                    });
  PointSelection sel;
  sel.safe_points.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
  std::sort(sel.safe_points.begin(), sel.safe_points.end());
  sel.terminal = count - 1;
  return sel;
}

enum class ConstraintSource { Safe, Backup };

// a'u + b >= 0, coefficients already worst-cased over the uncertainty boxes.
struct AffineConstraint {
  Vector a;
  double b = 0.0;
  std::size_t step = 0;
  ConstraintSource source = ConstraintSource::Safe;

  // Interval pieces the row was built from: drift term dh Phi f, input terms
  // dh Phi g_j and alpha(h). Kept for diagnostics and soundness checks.
  Interval drift_term;
  IVector input_terms;
  Interval class_k_term;

  double value(const Vector& u) const { return a.dot(u) + b; }
  bool satisfied(const Vector& u, double tol = 0.0) const { return value(u) >= -tol; }
};

// Enclosures of f over X0. Besides the plain interval image, models that
// accept jets also give the mean-value form f(x_c) + J(X0)(X0 - x_c), which
// keeps the correlation between coordinates that the plain image loses.
struct DriftEnclosure {
  IVector naive;
  std::optional<IMatrix> jacobian;
  IVector at_center;
  IVector offset;  // X0 - x_c
};

template <ControlAffineModel M>
DriftEnclosure enclose_drift(const M& model, const Box& X0) {
  DriftEnclosure d;
  const IVector X = X0.intervals();
  d.naive = model.drift(X);
  if constexpr (JetDifferentiable<M>) {
    if (X0.dim() <= Jet::kMaxDim) {
      const Vector xc = X0.mid();
      IVector c(xc.size());
      for (Eigen::Index i = 0; i < xc.size(); ++i) {
        c[i] = Interval(xc[i]);
      }
      d.at_center = model.drift(c);
      d.offset.resize(xc.size());
      for (Eigen::Index i = 0; i < xc.size(); ++i) {
        d.offset[i] = X[i] - c[i];
      }
      d.jacobian = interval_jacobian(model, X0);
    }
  }
  return d;
}

// Robust affine constraint for one backup-flow sample.
//
//   gradient   G = dh/dx over phi_i + delta
//   drift      D = G Phi_i f(X0) (tightest available form), inputs C_j = G Phi_i g_j(X0)
//   class-K    A = lambda h(phi_i + delta)
//   row        a = mid(C), b = lo(D) + lo(A) - sum_j rad(C_j) u_max_j
//
// For every u with |u_j| <= u_max_j and every realization inside the
// intervals, D + C u + A >= a'u + b, so a'u + b >= 0 is sufficient.
inline AffineConstraint robust_row(const QuadraticBarrier& barrier, const Vector& flow_state,
                                   const Matrix& flow_jacobian, const Box& delta_x,
                                   const DriftEnclosure& drift, const IMatrix& input_matrix,
                                   const Vector& u_max, double lambda) {
  const Box around_flow = around(flow_state, delta_x);
  const IVector X = around_flow.intervals();
  const IVector grad = barrier.gradient(X);
  const IVector grad_phi = row_times(grad, flow_jacobian);

  AffineConstraint c;
  c.drift_term = dot(grad_phi, drift.naive);
  if (drift.jacobian) {
    const Interval centered = dot(grad_phi, drift.at_center) +
                              dot(row_times(grad_phi, *drift.jacobian), drift.offset);
    c.drift_term = intersect(c.drift_term, centered);
  }
  c.input_terms.resize(input_matrix.cols());
  for (Eigen::Index j = 0; j < input_matrix.cols(); ++j) {
    c.input_terms[j] = dot(grad_phi, input_matrix.col(j));
  }
  c.class_k_term = alpha(barrier.value(X), lambda);

  c.a.resize(input_matrix.cols());
  double slack = 0.0;
  for (Eigen::Index j = 0; j < c.input_terms.size(); ++j) {
    c.a[j] = c.input_terms[j].mid();
    const double r = c.input_terms[j].rad();
    if (r > 0.0) {
      slack += r * u_max[j];
    }
  }
  c.b = c.drift_term.lo() + c.class_k_term.lo() - slack;
  return c;
}

// Constraints for the selected samples plus the terminal backup-set row.
// initial_set is the set X0 over which f and g are enclosed (the reachable
// box plus state uncertainty for the robust condition, the point x0 for the
// nominal one); delta_x translates each backup-flow sample.
template <ControlAffineModel M>
std::vector<AffineConstraint> build_constraints(const M& model, const Box& initial_set,
                                                const Box& delta_x,
                                                const SensitivityTrajectory& traj,
                                                const SafetySpec& spec,
                                                const PointSelection& selection) {
  if (selection.safe_points.empty()) {
    throw DimensionError("build_constraints: empty point selection");
  }
  const IVector X0 = initial_set.intervals();
  const DriftEnclosure drift = enclose_drift(model, initial_set);
  const IMatrix input_matrix = model.input_matrix(X0);
  const Vector& u_max = model.input_bound();

  std::vector<AffineConstraint> rows;
  rows.reserve(selection.safe_points.size() + 1);
  for (std::size_t i : selection.safe_points) {
    AffineConstraint c = robust_row(spec.safe, traj.base.states.at(i), traj.cumulative.at(i),
                                    delta_x, drift, input_matrix, u_max, spec.lambda);
    c.step = i;
    c.source = ConstraintSource::Safe;
    rows.push_back(std::move(c));
  }
  const std::size_t t = selection.terminal;
  AffineConstraint cb = robust_row(spec.backup_set, traj.base.states.at(t), traj.cumulative.at(t),
                                   delta_x, drift, input_matrix, u_max, spec.lambda);
  cb.step = t;
  cb.source = ConstraintSource::Backup;
  rows.push_back(std::move(cb));
  return rows;
}

// Robust condition with X0 = reachable_box(x0, dt) + delta_x.
template <ControlAffineModel M>
std::vector<AffineConstraint> build_constraints(const M& model, const Vector& x0,
                                                const Box& delta_x,
                                                const SensitivityTrajectory& traj,
                                                const SafetySpec& spec, double dt,
                                                const ReachOptions& reach = {}) {
  const Box X0 = box_sum(reachable_box(model, x0, dt, reach), delta_x);
  return build_constraints(model, X0, delta_x, traj, spec,
                           select_points(traj.base, spec, spec.points));
}

}  // namespace sdcbf

#endif  // SDCBF_BARRIER_HPP
