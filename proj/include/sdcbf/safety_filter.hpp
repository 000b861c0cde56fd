#ifndef SDCBF_SAFETY_FILTER_HPP
#define SDCBF_SAFETY_FILTER_HPP

#include <spdlog/spdlog.h>

#include <cmath>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "sdcbf/barrier.hpp"
#include "sdcbf/qp.hpp"
#include "sdcbf/reachability.hpp"
#include "sdcbf/sensitivity.hpp"

namespace sdcbf {

// Which initial set the constraint rows are enclosed over.
//   Nominal: the point estimate; no sampled-data or estimation robustness.
//   Robust:  reachable box over one period plus the state uncertainty box.
enum class Robustness { Nominal, Robust };

struct FilterOptions {
  double dt = 0.05;
  Robustness robustness = Robustness::Robust;
  SensitivityOptions sensitivity;
  ReachOptions reach;
  QpOptions qp;
};

struct FilterDiagnostics {
  bool inside = false;             // estimate inside the implicit set
  double membership_margin = 0.0;  // min h / h_B along the backup flow
  bool fallback = false;           // backup action returned
  bool infeasible = false;         // QP had no solution
  bool fault = false;              // integration/enclosure failure
  std::string fault_message;
  std::size_t num_constraints = 0;
  std::vector<int> active;              // active stacked rows at the optimum
  double min_constraint_margin = 0.0;   // min_i a_i'u + b_i at the output
  std::vector<AffineConstraint> constraints;
};

struct FilterOutput {
  Vector u;
  FilterDiagnostics diag;
};

// Sampled-data backup-CBF safety filter: backup rollout, sensitivities,
// robust rows, QP; the backup action whenever that pipeline cannot certify a
// safe input.
template <ControlAffineModel M>
class SafetyFilter {
 public:
  SafetyFilter(M model, SafetySpec spec, BackupController backup, FilterOptions opts)
      : model_(std::move(model)),
        spec_(std::move(spec)),
        backup_(std::move(backup)),
        opts_(opts),
        steps_(sdcbf::horizon_steps(spec_.horizon, opts_.dt)) {}

  const M& model() const { return model_; }
  const SafetySpec& spec() const { return spec_; }
  const BackupController& backup() const { return backup_; }
  const FilterOptions& options() const { return opts_; }
  std::size_t horizon_steps() const { return steps_; }

  SensitivityTrajectory backup_flow(const Vector& x) const {
    return flow_with_sensitivity(model_, x, backup_, opts_.dt, steps_, opts_.sensitivity);
  }

  FilterOutput filter_step(const Vector& x_est, const Box& delta_x, const Vector& u_des) const {
    FilterOutput out;
    auto& d = out.diag;
    auto fall_back = [&]() {
      d.fallback = true;
      out.u = backup_(x_est);
      return out;
    };

    SensitivityTrajectory traj;
    try {
      traj = backup_flow(x_est);
    } catch (const Error& e) {
      d.fault = true;
      d.fault_message = e.what();
      spdlog::warn("safety filter: backup rollout failed: {}", e.what());
      return fall_back();
    }
    const Membership mem = membership(traj.base, spec_);
    d.inside = mem.inside;
    d.membership_margin = mem.margin;
    if (!mem.inside) {
      return fall_back();
    }

    try {
      const PointSelection sel = select_points(traj.base, spec_, spec_.points);
      if (opts_.robustness == Robustness::Robust) {
        const Box X0 = box_sum(reachable_box(model_, x_est, opts_.dt, opts_.reach), delta_x);
        d.constraints = build_constraints(model_, X0, delta_x, traj, spec_, sel);
      } else {
        const Box point = Box::point(x_est);
        const Box none = Box::point(Vector::Zero(x_est.size()));
        d.constraints = build_constraints(model_, point, none, traj, spec_, sel);
      }
    } catch (const Error& e) {
      d.fault = true;
      d.fault_message = e.what();
      spdlog::warn("safety filter: constraint construction failed: {}", e.what());
      return fall_back();
    }

    FilterProblem qp;
    qp.u_des = u_des;
    qp.u_max = model_.input_bound();
    qp.A.resize(static_cast<Eigen::Index>(d.constraints.size()), model_.input_dim());
    qp.b.resize(static_cast<Eigen::Index>(d.constraints.size()));
    for (std::size_t i = 0; i < d.constraints.size(); ++i) {
      qp.A.row(static_cast<Eigen::Index>(i)) = d.constraints[i].a.transpose();
      qp.b[static_cast<Eigen::Index>(i)] = d.constraints[i].b;
    }
    d.num_constraints = d.constraints.size();

    QpResult sol;
    try {
      sol = solve_filter_qp(qp, opts_.qp);
    } catch (const Error& e) {
      d.fault = true;
      d.fault_message = e.what();
      spdlog::warn("safety filter: QP failed: {}", e.what());
      return fall_back();
    }
    if (sol.status == QpStatus::Infeasible) {
      d.infeasible = true;
      return fall_back();
    }
    out.u = sol.u;
    d.active = sol.active;
    d.min_constraint_margin = std::numeric_limits<double>::infinity();
    for (const auto& c : d.constraints) {
      d.min_constraint_margin = std::min(d.min_constraint_margin, c.value(out.u));
    }
    return out;
  }

 private:
  M model_;
  SafetySpec spec_;
  BackupController backup_;
  FilterOptions opts_;
  std::size_t steps_;
};

// The last n held inputs, oldest first. Starts as n zeros: nothing the
// controller computes can act before n periods have passed.
class InputBuffer {
 public:
  InputBuffer(std::size_t n, Eigen::Index input_dim) : n_(n) {
    for (std::size_t i = 0; i < n; ++i) {
      entries_.push_back(Vector::Zero(input_dim));
    }
  }

  std::size_t delay_steps() const { return n_; }
  std::size_t size() const { return entries_.size(); }
  const std::deque<Vector>& entries() const { return entries_; }

  // Append the newest input and drop the oldest (it has taken effect).
  void push(const Vector& u) {
    if (n_ == 0) {
      return;
    }
    entries_.push_back(u);
    entries_.pop_front();
    if (entries_.size() != n_) {
      throw std::logic_error("InputBuffer: length invariant violated");
    }
  }

 private:
  std::size_t n_;
  std::deque<Vector> entries_;
};

// State at which the next computed input starts acting: x integrated over the
// buffered inputs, each held for dt.
template <ControlAffineModel M>
Vector predict_delayed_state(const M& model, const Vector& x, const InputBuffer& buffer,
                             double dt, int substeps = 1) {
  Vector s = x;
  for (const Vector& u : buffer.entries()) {
    s = integrate_held(model, s, u, dt, substeps);
  }
  return s;
}

// Integer delay steps for a delay that may not be a multiple of dt: rounded
// up, with the leftover time reported so it can be absorbed as uncertainty.
struct DelaySplit {
  std::size_t steps = 0;
  double residual = 0.0;  // steps*dt - delay, in [0, dt)
};

inline DelaySplit split_delay(double delay, double dt) {
  if (!(delay >= 0.0) || !(dt > 0.0)) {
    throw DimensionError("split_delay: need delay >= 0 and dt > 0");
  }
  const double ratio = delay / dt;
  double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio)) {
    steps = std::ceil(ratio);
  }
  DelaySplit s;
  s.steps = static_cast<std::size_t>(steps);
  s.residual = std::max(0.0, steps * dt - delay);
  return s;
}

struct DelayedOutput {
  Vector u;
  Vector x_predicted;
  FilterDiagnostics diag;
};

// Filter for a known input delay of n periods: build the constraints at the
// state where the new input will start acting, then shift it into the
// buffer.
template <ControlAffineModel M>
class DelayedSafetyFilter {
 public:
  DelayedSafetyFilter(SafetyFilter<M> filter, std::size_t delay_steps, int predict_substeps = 1)
      : filter_(std::move(filter)),
        buffer_(delay_steps, filter_.model().input_dim()),
        substeps_(predict_substeps) {}

  const SafetyFilter<M>& filter() const { return filter_; }
  const InputBuffer& buffer() const { return buffer_; }

  Vector predict(const Vector& x_est) const {
    return predict_delayed_state(filter_.model(), x_est, buffer_, filter_.options().dt, substeps_);
  }

  // margin inflates delta_x for prediction error (zero when the model and
  // state are exact).
  DelayedOutput delayed_filter_step(const Vector& x_est, const Box& delta_x, const Vector& u_des,
                                    const Box& margin) {
    DelayedOutput out;
    try {
      out.x_predicted = predict(x_est);
    } catch (const Error& e) {
      spdlog::warn("delayed filter: prediction failed: {}", e.what());
      out.x_predicted = x_est;
      out.u = filter_.backup()(x_est);
      out.diag.fallback = true;
      out.diag.fault = true;
      out.diag.fault_message = e.what();
      buffer_.push(out.u);
      return out;
    }
    FilterOutput f = filter_.filter_step(out.x_predicted, box_sum(delta_x, margin), u_des);
    out.u = std::move(f.u);
    out.diag = std::move(f.diag);
    buffer_.push(out.u);
    return out;
  }

  DelayedOutput delayed_filter_step(const Vector& x_est, const Box& delta_x, const Vector& u_des) {
    return delayed_filter_step(x_est, delta_x, u_des,
                               Box::point(Vector::Zero(x_est.size())));
  }

 private:
  SafetyFilter<M> filter_;
  InputBuffer buffer_;
  int substeps_;
};

struct StartupCheck {
  bool passed = true;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::size_t samples = 0;
};

// Zero input for the first n periods must keep every start state in the
// implicit set. Checked on the box vertices plus random interior samples;
// this is an empirical check, not a proof.
template <ControlAffineModel M>
StartupCheck check_zero_input_startup(const SafetyFilter<M>& filter, const Box& initial_set,
                                      std::size_t delay_steps, std::size_t interior_samples = 100,
                                      std::uint64_t seed = 1, int substeps = 1) {
  const auto n = initial_set.dim();
  std::vector<Vector> starts;
  const std::size_t vertices = std::size_t{1} << n;
  for (std::size_t v = 0; v < vertices; ++v) {
    Vector s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      s[i] = ((v >> i) & 1U) ? 1.0 : 0.0;
    }
    starts.push_back(initial_set.at(s));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < interior_samples; ++k) {
    Vector s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      s[i] = unit(rng);
    }
    starts.push_back(initial_set.at(s));
  }
  StartupCheck res;
  const InputBuffer zeros(delay_steps, filter.model().input_dim());
  for (const Vector& x : starts) {
    const Vector after = predict_delayed_state(filter.model(), x, zeros, filter.options().dt, substeps);
    const Membership m = membership(filter.backup_flow(after).base, filter.spec());
    res.worst_margin = std::min(res.worst_margin, m.margin);
    res.passed = res.passed && m.inside;
    ++res.samples;
  }
  return res;
}

}  // namespace sdcbf

#endif  // SDCBF_SAFETY_FILTER_HPP
