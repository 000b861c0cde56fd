#ifndef SDCBF_DYNAMICS_HPP
#define SDCBF_DYNAMICS_HPP

#include <spdlog/spdlog.h>

#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "sdcbf/box.hpp"
#include "sdcbf/errors.hpp"

namespace sdcbf {

// A control-affine model xdot = f(x) + g(x) u with box input set
// {-u_max <= u <= u_max}. drift/input_matrix are templates over the scalar so
// the same expressions serve point evaluation and interval enclosure.
template <class M>
concept ControlAffineModel = requires(const M& m, const Vector& x, const IVector& xi) {
  { m.state_dim() } -> std::convertible_to<Eigen::Index>;
  { m.input_dim() } -> std::convertible_to<Eigen::Index>;
  { m.input_bound() } -> std::convertible_to<Vector>;
  { m.drift(x) } -> std::convertible_to<Vector>;
  { m.input_matrix(x) } -> std::convertible_to<Matrix>;
  { m.drift(xi) } -> std::convertible_to<IVector>;
  { m.input_matrix(xi) } -> std::convertible_to<IMatrix>;
};

// xdot = A x + B u.
class LinearModel {
 public:
  LinearModel(Matrix A, Matrix B, Vector u_max = {})
      : A_(std::move(A)), B_(std::move(B)), u_max_(std::move(u_max)) {
    require_same_dim(A_.rows(), A_.cols(), "LinearModel A");
    require_same_dim(A_.rows(), B_.rows(), "LinearModel B");
    if (u_max_.size() == 0) {
      u_max_ = Vector::Constant(B_.cols(), std::numeric_limits<double>::infinity());
    }
    require_same_dim(u_max_.size(), B_.cols(), "LinearModel u_max");
  }

  Eigen::Index state_dim() const { return A_.rows(); }
  Eigen::Index input_dim() const { return B_.cols(); }
  const Vector& input_bound() const { return u_max_; }
  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }

  template <class T>
  VecT<T> drift(const VecT<T>& x) const {
    return mat_vec<T>(A_, x);
  }
  template <class T>
  MatT<T> input_matrix(const VecT<T>&) const {
    return B_.cast<T>();
  }

 private:
  Matrix A_;
  Matrix B_;
  Vector u_max_;
};

inline Vector saturate(const Vector& u, const Vector& u_max) {
  require_same_dim(u.size(), u_max.size(), "saturate");
  return u.cwiseMax(-u_max).cwiseMin(u_max);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline std::string format_vector(const Vector& v) {
  std::ostringstream os;
  os << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    os << (i ? ", " : "") << v[i];
  }
  os << ']';
  return os.str();
}

template <ControlAffineModel M>
Vector eval_dynamics(const M& model, const Vector& x, const Vector& u) {
  require_same_dim(x.size(), model.state_dim(), "eval_dynamics state");
  require_same_dim(u.size(), model.input_dim(), "eval_dynamics input");
  if (!all_finite(x) || !all_finite(u)) {
    throw ModelError("non-finite state or input: x = " + format_vector(x) +
                     ", u = " + format_vector(u));
  }
  const Vector& u_max = model.input_bound();
  if (((u.array().abs() - u_max.array()) > 1e-12).any()) {
    spdlog::warn("eval_dynamics: input {} outside admissible set", format_vector(u));
  }
  Vector xdot = model.drift(x) + model.input_matrix(x) * u;
  if (!all_finite(xdot)) {
    throw ModelError("non-finite dynamics at state " + format_vector(x));
  }
  return xdot;
}

// One classical RK4 step of xdot = f(x) + g(x) u_held. The held input is
// saturated to the model's input box first.
template <ControlAffineModel M>
Vector step_zoh(const M& model, const Vector& x, const Vector& u_held, double dt) {
  if (!(dt > 0.0)) {
    throw IntegrationError("step_zoh: dt must be positive");
  }
  const Vector u = saturate(u_held, model.input_bound());
  auto rhs = [&](const Vector& s) {
    Vector d = model.drift(s) + model.input_matrix(s) * u;
    if (!all_finite(d)) {
      throw IntegrationError("non-finite derivative during RK4 stage at state " +
                             format_vector(s) + " (start " + format_vector(x) + ")");
    }
    return d;
  };
  const Vector k1 = rhs(x);
  const Vector k2 = rhs(x + 0.5 * dt * k1);
  const Vector k3 = rhs(x + 0.5 * dt * k2);
  const Vector k4 = rhs(x + dt * k3);
  Vector next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!all_finite(next)) {
    throw IntegrationError("non-finite state after RK4 step from " + format_vector(x));
  }
  return next;
}

// Hold u over dt, integrated with `substeps` equal RK4 steps.
template <ControlAffineModel M>
Vector integrate_held(const M& model, const Vector& x, const Vector& u_held, double dt,
                      int substeps = 1) {
  if (substeps < 1) {
    throw IntegrationError("integrate_held: substeps must be >= 1");
  }
  Vector s = x;
  const double h = dt / substeps;
  for (int i = 0; i < substeps; ++i) {
    s = step_zoh(model, s, u_held, h);
  }
  return s;
}

// Sampled trajectory: states[k] at t = k*dt, held_inputs[k] applied over
// [k*dt, (k+1)*dt).
struct Trajectory {
  double dt = 0.0;
  int substeps = 1;
  std::vector<Vector> states;
  std::vector<Vector> held_inputs;

  std::size_t steps() const { return held_inputs.size(); }
  const Vector& terminal() const { return states.back(); }
};

// Feedback policies take the sampled state; open-loop signals may use the
// step index instead.
template <class P>
concept StatePolicy = std::invocable<const P&, const Vector&>;
template <class P>
concept IndexedPolicy = std::invocable<const P&, const Vector&, std::size_t>;

template <class P>
Vector sample_policy(const P& policy, const Vector& x, std::size_t k) {
  if constexpr (IndexedPolicy<P>) {
    return policy(x, k);
  } else {
    return policy(x);
  }
}

// Simulate under zero-order hold: the policy is evaluated exactly once per
// step, at the step boundary, and its output held for the whole step.
template <ControlAffineModel M, class P>
  requires StatePolicy<P> || IndexedPolicy<P>
Trajectory simulate_zoh(const M& model, const Vector& x0, const P& policy, double dt,
                        std::size_t steps, int substeps = 1) {
  if (steps < 1) {
    throw IntegrationError("simulate_zoh: steps must be >= 1");
  }
  Trajectory traj;
  traj.dt = dt;
  traj.substeps = substeps;
  traj.states.reserve(steps + 1);
  traj.held_inputs.reserve(steps);
  traj.states.push_back(x0);
  for (std::size_t k = 0; k < steps; ++k) {
    const Vector& x = traj.states.back();
    Vector u = saturate(sample_policy(policy, x, k), model.input_bound());
    try {
      traj.states.push_back(integrate_held(model, x, u, dt, substeps));
    } catch (const IntegrationError& e) {
      throw IntegrationError("step " + std::to_string(k) + ": " + e.what());
    }
    traj.held_inputs.push_back(std::move(u));
  }
  return traj;
}

}  // namespace sdcbf

#endif  // SDCBF_DYNAMICS_HPP
