#ifndef SDCBF_SENSITIVITY_HPP
#define SDCBF_SENSITIVITY_HPP

#include <spdlog/spdlog.h>

#include <cmath>
#include <span>
#include <vector>

#include "sdcbf/dynamics.hpp"

namespace sdcbf {

enum class DifferenceScheme { Central, Forward };

struct SensitivityOptions {
  // Perturbation is eps_scale * (1 + |x|_inf).
  double eps_scale = 1e-5;
  DifferenceScheme scheme = DifferenceScheme::Central;
  // |det| of a cumulative Jacobian below this logs a warning.
  double det_floor = 1e-30;
  // RK4 substeps per held interval.
  int substeps = 1;
};

inline double perturbation_size(const Vector& x, const SensitivityOptions& opts) {
  return opts.eps_scale * (1.0 + x.lpNorm<Eigen::Infinity>());
}

// d(flow over one held interval)/dx by finite differences, every rollout
// using the same held input.
template <ControlAffineModel M>
Matrix step_jacobian(const M& model, const Vector& x, const Vector& u_held, double dt,
                     const SensitivityOptions& opts = {}) {
  if (!(dt > 0.0)) {
    throw SensitivityError("step_jacobian: dt must be positive");
  }
  const double eps = perturbation_size(x, opts);
  if (!(eps > 0.0)) {
    throw SensitivityError("step_jacobian: perturbation size must be positive");
  }
  const Eigen::Index n = x.size();
  Matrix J(n, n);
  Vector base;
  if (opts.scheme == DifferenceScheme::Forward) {
    base = integrate_held(model, x, u_held, dt, opts.substeps);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    Vector xp = x;
    xp[j] += eps;
    if (opts.scheme == DifferenceScheme::Central) {
      Vector xm = x;
      xm[j] -= eps;
      J.col(j) = (integrate_held(model, xp, u_held, dt, opts.substeps) -
                  integrate_held(model, xm, u_held, dt, opts.substeps)) /
                 (2.0 * eps);
    } else {
      J.col(j) = (integrate_held(model, xp, u_held, dt, opts.substeps) - base) / eps;
    }
    if (!J.col(j).allFinite()) {
      throw SensitivityError("non-finite sensitivity column for state axis " + std::to_string(j));
    }
  }
  return J;
}

// Ordered product J_{k-1} ... J_1 J_0: the earliest step is the rightmost
// factor.
inline Matrix compose_sensitivities(std::span<const Matrix> step_jacobians) {
  if (step_jacobians.empty()) {
    throw DimensionError("compose_sensitivities: empty list");
  }
  Matrix acc = step_jacobians.front();
  for (std::size_t i = 1; i < step_jacobians.size(); ++i) {
    const Matrix& J = step_jacobians[i];
    if (J.rows() != acc.rows() || J.cols() != acc.rows()) {
      throw DimensionError("compose_sensitivities: step " + std::to_string(i) +
                           " is not square of matching size");
    }
    acc = J * acc;
  }
  return acc;
}

struct SensitivityTrajectory {
  Trajectory base;
  std::vector<Matrix> step_jacobians;
  // cumulative[i] = d(state at i*dt)/d(x0); cumulative[0] = I.
  std::vector<Matrix> cumulative;

  std::size_t steps() const { return step_jacobians.size(); }
};

// Backup rollout with sensitivities. The policy is sampled once per step on
// the nominal state and that held input is reused for every perturbed
// rollout of the step, so each per-step map is smooth.
template <ControlAffineModel M, class P>
  requires StatePolicy<P> || IndexedPolicy<P>
SensitivityTrajectory flow_with_sensitivity(const M& model, const Vector& x0, const P& policy,
                                            double dt, std::size_t steps,
                                            const SensitivityOptions& opts = {}) {
  SensitivityTrajectory out;
  out.base.dt = dt;
  out.base.substeps = opts.substeps;
  out.base.states.reserve(steps + 1);
  out.base.held_inputs.reserve(steps);
  out.step_jacobians.reserve(steps);
  out.cumulative.reserve(steps + 1);
  out.base.states.push_back(x0);
  out.cumulative.push_back(Matrix::Identity(x0.size(), x0.size()));
  bool warned = false;
  for (std::size_t k = 0; k < steps; ++k) {
    const Vector x = out.base.states.back();
    Vector u = saturate(sample_policy(policy, x, k), model.input_bound());
    Matrix J;
    try {
      out.base.states.push_back(integrate_held(model, x, u, dt, opts.substeps));
      J = step_jacobian(model, x, u, dt, opts);
    } catch (const Error& e) {
      throw SensitivityError("backup rollout step " + std::to_string(k) + ": " + e.what());
    }
    out.cumulative.push_back(J * out.cumulative.back());
    if (!warned && std::abs(out.cumulative.back().determinant()) < opts.det_floor) {
      spdlog::warn("flow sensitivity nearly singular at step {}", k + 1);
      warned = true;
    }
    out.step_jacobians.push_back(std::move(J));
    out.base.held_inputs.push_back(std::move(u));
  }
  return out;
}

}  // namespace sdcbf

#endif  // SDCBF_SENSITIVITY_HPP
