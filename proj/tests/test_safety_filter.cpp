#include <gtest/gtest.h>

#include <algorithm>
#include <deque>

#include "sdcbf/sdcbf.hpp"

using namespace sdcbf;

namespace {

Vector v(std::initializer_list<double> xs) {
  Vector r(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) r[i++] = x;
  return r;
}

struct Fixture {
  ScenarioConfig cfg;
  SegwayModel seg{cfg.segway};
  BackupDesign d = design_backup(seg, cfg);
  Plant plant{seg, d.certificate.K};

  SafetyFilter<Plant> filter(Robustness r, double dt) const {
    FilterOptions o;
    o.dt = dt;
    o.robustness = r;
    return SafetyFilter<Plant>(plant, d.spec, d.backup, o);
  }
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

const Box kNoUncertainty = Box::point(Vector::Zero(4));

}  // namespace

TEST(FilterStep, RestAtOriginPassesThrough) {
  for (auto r : {Robustness::Nominal, Robustness::Robust}) {
    const auto f = fx().filter(r, 0.05);
    const FilterOutput out = f.filter_step(Vector::Zero(4), kNoUncertainty, v({0}));
    EXPECT_EQ(out.u, v({0}));
    EXPECT_FALSE(out.diag.fallback);
    EXPECT_EQ(out.diag.num_constraints, 11u);
  }
}

TEST(FilterStep, AggressiveInputNearWallIsCut) {
  const auto f = fx().filter(Robustness::Nominal, 0.025);
  const double umax = fx().seg.input_bound()[0];
  const FilterOutput out = f.filter_step(v({0.45, 0.06, 0, 0}), kNoUncertainty, v({-umax}));
  ASSERT_FALSE(out.diag.fallback);
  EXPECT_LT(std::abs(out.u[0]), umax - 1.0);
  EXPECT_LT(out.u[0], 0.0);
  EXPECT_FALSE(out.diag.active.empty());
  EXPECT_GE(out.diag.min_constraint_margin, -1e-10);
}

TEST(FilterStep, OutsideSafeSetFallsBack) {
  const auto f = fx().filter(Robustness::Robust, 0.05);
  const Vector x = v({0.6, 0, 0, 0});
  const FilterOutput out = f.filter_step(x, kNoUncertainty, v({3}));
  EXPECT_TRUE(out.diag.fallback);
  EXPECT_FALSE(out.diag.inside);
  EXPECT_EQ(out.u, fx().d.backup(x));
}

TEST(FilterStep, IdempotentOnSafeInputs) {
  const auto f = fx().filter(Robustness::Nominal, 0.025);
  const FilterOutput out = f.filter_step(v({0.1, 0.0, 0.0, 0.0}), kNoUncertainty, v({0.731}));
  ASSERT_FALSE(out.diag.fallback);
  for (const auto& c : out.diag.constraints) ASSERT_TRUE(c.satisfied(v({0.731})));
  EXPECT_EQ(out.u[0], 0.731);
}

TEST(FilterStep, ClosedLoopKeepsMembership) {
  // Robust filter at 20 Hz, exact state: every sample stays in the implicit set.
  const auto& F = fx();
  const double dt = 0.05;
  const auto f = F.filter(Robustness::Robust, dt);
  Vector x = v({0.05, 0, 0, 0});
  ASSERT_TRUE(membership(F.plant, x, F.d.spec, F.d.backup, dt).inside);
  for (int k = 0; k < 80; ++k) {
    const double u_des = std::clamp(40.0 * (x[0] - 0.8) + 10.0 * x[1] + 150.0 * x[2] + 20.0 * x[3],
                                    -20.0, 20.0);
    const FilterOutput out = f.filter_step(x, kNoUncertainty, v({u_des}));
    x = integrate_held(F.plant, x, out.u, dt, 10);
    const Membership m = membership(F.plant, x, F.d.spec, F.d.backup, dt);
    ASSERT_TRUE(m.inside) << "sample " << k;
    ASSERT_GE(F.d.spec.safe(x), 0.0);
  }
}

TEST(InputBuffer, InitializedToZerosAndConserved) {
  InputBuffer b(3, 1);
  ASSERT_EQ(b.size(), 3u);
  for (const auto& u : b.entries()) EXPECT_EQ(u, v({0}));
  for (int k = 1; k <= 7; ++k) {
    b.push(v({double(k)}));
    ASSERT_EQ(b.size(), 3u);
  }
  EXPECT_EQ(b.entries()[0], v({5}));
  EXPECT_EQ(b.entries()[1], v({6}));
  EXPECT_EQ(b.entries()[2], v({7}));
  InputBuffer none(0, 1);
  none.push(v({1}));
  EXPECT_EQ(none.size(), 0u);
}

TEST(PredictDelayed, Examples) {
  const LinearModel integ(Matrix::Zero(1, 1), Matrix::Constant(1, 1, 1.0));
  EXPECT_EQ(predict_delayed_state(integ, v({2}), InputBuffer(0, 1), 0.1), v({2}));
  InputBuffer ones(3, 1);
  for (int i = 0; i < 3; ++i) ones.push(v({1}));
  EXPECT_NEAR(predict_delayed_state(integ, v({2}), ones, 0.1)[0], 2.3, 1e-12);
  const Vector x0 = v({0.1, 0.2, 0.03, 0});
  const Vector p = predict_delayed_state(fx().plant, x0, InputBuffer(4, 1), 0.025, 2);
  const Trajectory t = simulate_zoh(fx().plant, x0, [](const Vector&) { return v({0}); }, 0.025, 4, 2);
  EXPECT_EQ(p, t.terminal());
}

TEST(SplitDelay, IntegerAndRoundedUp) {
  const DelaySplit a = split_delay(0.03, 0.01);
  EXPECT_EQ(a.steps, 3u);
  EXPECT_NEAR(a.residual, 0.0, 1e-15);
  const DelaySplit b = split_delay(0.03, 0.025);
  EXPECT_EQ(b.steps, 2u);
  EXPECT_NEAR(b.residual, 0.02, 1e-12);
  EXPECT_EQ(split_delay(0.0, 0.05).steps, 0u);
  EXPECT_THROW(split_delay(-1.0, 0.05), DimensionError);
}

TEST(DelayedFilter, NoDelayMatchesPlainFilter) {
  const auto f = fx().filter(Robustness::Nominal, 0.025);
  DelayedSafetyFilter<Plant> df(f, 0, 1);
  const Vector x = v({0.4, 0.05, 0.0, 0.0});
  const auto a = df.delayed_filter_step(x, kNoUncertainty, v({-15}));
  const auto b = f.filter_step(x, kNoUncertainty, v({-15}));
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.x_predicted, x);
}

TEST(DelayedFilter, PredictionMatchesPlantNStepsLater) {
  const auto& F = fx();
  const double dt = 0.01;
  const int S = 10;
  const std::size_t n = 3;
  DelayedSafetyFilter<Plant> df(F.filter(Robustness::Nominal, dt), n, S);
  // Plant with a delay line: the input applied at sample k is the one
  // computed at sample k - n (zeros before that).
  std::deque<Vector> line(n, v({0}));
  Vector x = v({0.0, 0.0, 0.0, 0.0});
  std::vector<Vector> predicted, states;
  for (int k = 0; k < 200; ++k) {
    states.push_back(x);
    const double u_des = std::clamp(40.0 * (x[0] - 0.8) + 10.0 * x[1] + 150.0 * x[2] + 20.0 * x[3],
                                    -20.0, 20.0);
    const auto out = df.delayed_filter_step(x, kNoUncertainty, v({u_des}));
    predicted.push_back(out.x_predicted);
    ASSERT_EQ(df.buffer().size(), n);
    EXPECT_EQ(df.buffer().entries().back(), out.u);
    line.push_back(out.u);
    const Vector applied = line.front();
    line.pop_front();
    x = integrate_held(F.plant, x, applied, dt, S);
  }
  for (std::size_t k = 0; k + n < states.size(); ++k) {
    ASSERT_LT((predicted[k] - states[k + n]).lpNorm<Eigen::Infinity>(), 1e-10) << "sample " << k;
  }
}

TEST(StartupCheck, ZeroInputFromSmallBox) {
  const auto f = fx().filter(Robustness::Robust, 0.01);
  const StartupCheck ok = check_zero_input_startup(f, Box::symmetric(v({0.01, 0.01, 0.005, 0.01})), 3);
  EXPECT_TRUE(ok.passed);
  EXPECT_EQ(ok.samples, 16u + 100u);
  EXPECT_GT(ok.worst_margin, 0.0);
  const StartupCheck bad = check_zero_input_startup(f, around(v({0.49, 0.5, 0, 0}), Box::symmetric(v({0.01, 0.01, 0.01, 0.01}))), 3);
  EXPECT_FALSE(bad.passed);
}
