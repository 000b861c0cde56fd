#include <gtest/gtest.h>

#include <cmath>

#include "sdcbf/sdcbf.hpp"

using namespace sdcbf;

namespace {

LinearModel scalar(double a, double b = 0.0) {
  return LinearModel(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, b));
}

LinearModel double_integrator() {
  Matrix A(2, 2);
  A << 0, 1, 0, 0;
  Matrix B(2, 1);
  B << 0, 1;
  return LinearModel(A, B);
}

LinearModel zero_model() { return LinearModel(Matrix::Zero(2, 2), Matrix::Zero(2, 1)); }

Vector v(std::initializer_list<double> xs) {
  Vector r(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) r[i++] = x;
  return r;
}

}  // namespace

TEST(EvalDynamics, SegwayEquilibrium) {
  const SegwayModel seg;
  const Vector xdot = eval_dynamics(seg, Vector::Zero(4), Vector::Zero(1));
  EXPECT_EQ(xdot, Vector::Zero(4));
}

TEST(EvalDynamics, LinearModel) {
  const Vector xdot = eval_dynamics(double_integrator(), v({1, 2}), v({3}));
  EXPECT_EQ(xdot, v({2, 3}));
}

TEST(EvalDynamics, GravityTipsBody) {
  const SegwayModel seg;
  const Vector xdot = eval_dynamics(seg, v({0, 0, 0.1, 0}), Vector::Zero(1));
  EXPECT_GT(xdot[3], 0.0);
}

TEST(EvalDynamics, SegwayLinearizationUnstable) {
  const SegwayModel seg;
  const Matrix A = drift_jacobian(seg, Vector::Zero(4));
  const auto ev = A.eigenvalues();
  double max_re = -1e300;
  for (Eigen::Index i = 0; i < ev.size(); ++i) max_re = std::max(max_re, ev[i].real());
  EXPECT_GT(max_re, 0.0);
}

TEST(EvalDynamics, NonFiniteThrows) {
  const Vector x = v({std::numeric_limits<double>::infinity(), 0});
  EXPECT_THROW(eval_dynamics(double_integrator(), x, v({0})), ModelError);
}

TEST(StepZoh, ZeroDynamics) {
  const Vector x = v({0.3, -1.2});
  EXPECT_EQ(step_zoh(zero_model(), x, v({5}), 0.05), x);
}

TEST(StepZoh, ScalarDecay) {
  EXPECT_NEAR(step_zoh(scalar(-1.0), v({1}), v({0}), 0.1)[0], 0.9048374, 1e-7);
}

TEST(StepZoh, DoubleIntegratorExact) {
  const Vector x = step_zoh(double_integrator(), v({0, 1}), v({0}), 0.5);
  EXPECT_NEAR(x[0], 0.5, 1e-15);
  EXPECT_NEAR(x[1], 1.0, 1e-15);
}

TEST(StepZoh, RejectsNonPositiveDt) {
  EXPECT_THROW(step_zoh(scalar(-1.0), v({1}), v({0}), 0.0), IntegrationError);
}

TEST(StepZoh, FourthOrderLocalError) {
  // x' = x cos(t)-free test: x' = -x^... use the linear oscillator with a known flow.
  Matrix A(2, 2);
  A << 0, 1, -1, 0;
  const LinearModel osc(A, Matrix::Zero(2, 1));
  const Vector x0 = v({1, 0});
  auto err = [&](double dt) {
    const Vector x = step_zoh(osc, x0, v({0}), dt);
    return (x - v({std::cos(dt), -std::sin(dt)})).norm();
  };
  const double ratio = err(0.2) / err(0.1);
  EXPECT_NEAR(ratio, 32.0, 0.2 * 32.0);
}

TEST(SimulateZoh, OneStepEqualsStepZoh) {
  const SegwayModel seg;
  const Vector x0 = v({0.1, 0, 0.05, 0});
  auto pol = [](const Vector&) { return v({1.5}); };
  const Trajectory t = simulate_zoh(seg, x0, pol, 0.025, 1);
  EXPECT_EQ(t.states[1], step_zoh(seg, x0, v({1.5}), 0.025));
}

TEST(SimulateZoh, ConstantInputIntegral) {
  const Trajectory t = simulate_zoh(scalar(0.0, 1.0), v({2}), [](const Vector&) { return v({1}); },
                                    0.1, 10);
  EXPECT_NEAR(t.terminal()[0], 3.0, 1e-12);
}

TEST(SimulateZoh, RejectsZeroSteps) {
  EXPECT_THROW(simulate_zoh(scalar(-1), v({1}), [](const Vector&) { return v({0}); }, 0.1, 0),
               IntegrationError);
}

TEST(SimulateZoh, TrajectoryInvariants) {
  const SegwayModel seg;
  auto pol = [](const Vector& x) { return v({-30.0 * x[2] - 5.0 * x[3]}); };
  const Trajectory t = simulate_zoh(seg, v({0, 0, 0.05, 0}), pol, 0.02, 25, 2);
  ASSERT_EQ(t.states.size(), t.held_inputs.size() + 1);
  for (std::size_t k = 0; k < t.steps(); ++k) {
    EXPECT_LE(std::abs(t.held_inputs[k][0]), seg.input_bound()[0]);
    const Vector re = integrate_held(seg, t.states[k], t.held_inputs[k], t.dt, t.substeps);
    EXPECT_LT((re - t.states[k + 1]).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(SimulateZoh, PolicySampledOnlyAtBoundaries) {
  int calls = 0;
  auto pol = [&calls](const Vector&, std::size_t k) {
    ++calls;
    return v({k % 2 ? 1.0 : -1.0});
  };
  const Trajectory a = simulate_zoh(double_integrator(), v({0, 0}), pol, 0.1, 7);
  EXPECT_EQ(calls, 7);
  const Trajectory b = simulate_zoh(double_integrator(), v({0, 0}), pol, 0.1, 7);
  for (std::size_t i = 0; i < a.states.size(); ++i) EXPECT_EQ(a.states[i], b.states[i]);
}

TEST(SimulateZoh, SaturatesInputs) {
  const SegwayModel seg;
  const Trajectory t =
      simulate_zoh(seg, Vector::Zero(4), [](const Vector&) { return v({1e6}); }, 0.01, 2);
  EXPECT_EQ(t.held_inputs[0][0], seg.input_bound()[0]);
}

TEST(SimulateZoh, BackupReachesBackupSet) {
  const ScenarioConfig cfg;
  const SegwayModel seg(cfg.segway);
  const BackupDesign d = design_backup(seg, cfg);
  const Plant plant(seg, d.certificate.K);
  const Trajectory t = simulate_zoh(plant, v({0.3, 0, 0, 0}), d.backup, 0.025, 40);
  EXPECT_GE(d.spec.backup_set(t.terminal()), 0.0);
}
