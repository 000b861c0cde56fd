#include <gtest/gtest.h>

#include <random>

#include "sdcbf/sdcbf.hpp"

using namespace sdcbf;

namespace {

Vector v(std::initializer_list<double> xs) {
  Vector r(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) r[i++] = x;
  return r;
}

Vector uniform_in(const Box& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Vector s(b.dim());
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = U(rng);
  return b.at(s);
}

}  // namespace

TEST(Box, Invariants) {
  EXPECT_THROW(Box(v({1}), v({0})), DimensionError);
  const Box b(v({-1, 2}), v({3, 2}));
  EXPECT_TRUE(b.contains(b.mid()));
  EXPECT_TRUE((b.radius().array() >= 0).all());
}

TEST(BoxSum, Examples) {
  const Box s = box_sum(Box::point(v({0, 0})), Box(v({-1, -1}), v({1, 1})));
  EXPECT_EQ(s.lo(), v({-1, -1}));
  EXPECT_EQ(s.hi(), v({1, 1}));
  const Box t = box_sum(Box(v({1}), v({2})), Box(v({-0.5}), v({0.5})));
  EXPECT_EQ(t.lo()[0], 0.5);
  EXPECT_EQ(t.hi()[0], 2.5);
  const double r = 0.25;
  Box acc = Box::symmetric(v({r}));
  for (int k = 2; k <= 6; ++k) {
    acc = box_sum(acc, Box::symmetric(v({r})));
    EXPECT_EQ(acc.lo()[0], -k * r);
    EXPECT_EQ(acc.hi()[0], k * r);
  }
  EXPECT_THROW(box_sum(Box::point(v({0})), Box::point(v({0, 0}))), DimensionError);
}

TEST(EllipsoidBox, Tight) {
  Matrix P(2, 2);
  P << 2, 0.5, 0.5, 1;
  const Box b = ellipsoid_bounding_box(P, 0.3, Vector::Zero(2));
  // The extreme point along axis 0 lies on the ellipsoid.
  const Matrix Pi = P.inverse();
  const Vector x = std::sqrt(0.3 / Pi(0, 0)) * Pi.col(0);
  EXPECT_NEAR(x.dot(P * x), 0.3, 1e-12);
  EXPECT_NEAR(x[0], b.hi()[0], 1e-12);
}

TEST(IntervalEval, CorridorExamples) {
  const auto h = QuadraticBarrier::corridor(1, 0, 0.5);  // 1 - 4 p^2
  auto H = [&](const IVector& x) { return h.value<Interval>(x); };
  auto G = [&](const IVector& x) { return h.gradient<Interval>(x); };
  const Interval p0 = interval_eval(H, Box::point(v({0})));
  EXPECT_EQ(p0, Interval(1.0));
  const Interval pw = interval_eval(H, Box(v({-0.1}), v({0.1})));
  EXPECT_NEAR(pw.lo(), 0.96, 1e-12);
  EXPECT_NEAR(pw.hi(), 1.0, 1e-12);
  const IVector g = interval_eval(G, Box(v({0.2}), v({0.3})));
  EXPECT_NEAR(g[0].lo(), -2.4, 1e-12);
  EXPECT_NEAR(g[0].hi(), -1.6, 1e-12);
}

TEST(IntervalEval, SegwayInclusion) {
  const SegwayModel seg;
  const auto h = QuadraticBarrier::corridor(4, 0, 0.5);
  std::mt19937_64 rng(3);
  const Box X(v({-0.3, -0.5, -0.2, -1.0}), v({0.2, 0.4, 0.3, 0.8}));
  const IVector F = seg.drift(X.intervals());
  const IMatrix Gm = seg.input_matrix(X.intervals());
  const Interval Hx = h.value<Interval>(X.intervals());
  const IVector Dh = h.gradient<Interval>(X.intervals());
  for (int i = 0; i < 1000; ++i) {
    const Vector x = uniform_in(X, rng);
    const Vector f = seg.drift(x);
    const Matrix g = seg.input_matrix(x);
    const Vector dh = h.gradient<double>(x);
    ASSERT_TRUE(Hx.contains(h(x)));
    for (int j = 0; j < 4; ++j) {
      ASSERT_TRUE(F[j].contains(f[j]));
      ASSERT_TRUE(Gm(j, 0).contains(g(j, 0)));
      ASSERT_TRUE(Dh[j].contains(dh[j]));
    }
  }
}

TEST(IntervalEval, Monotone) {
  const SegwayModel seg;
  const Box small(v({0, 0, 0.05, 0}), v({0.1, 0.1, 0.1, 0.1}));
  const Box big = small.inflated(3.0);
  const IVector a = seg.drift(small.intervals());
  const IVector b = seg.drift(big.intervals());
  for (int j = 0; j < 4; ++j) EXPECT_TRUE(b[j].contains(a[j]));
}

TEST(Reach, FrozenDynamicsDegenerate) {
  const LinearModel zero(Matrix::Zero(2, 2), Matrix::Zero(2, 1), v({1}));
  const Box r = reachable_box(zero, v({0.3, -0.2}), 0.05);
  EXPECT_TRUE(r.is_point());
  EXPECT_EQ(r.lo(), v({0.3, -0.2}));
}

TEST(Reach, ScalarIntegrator) {
  const LinearModel m(Matrix::Zero(1, 1), Matrix::Constant(1, 1, 1.0), v({1}));
  const Box r = reachable_box(m, v({2}), 0.05);
  EXPECT_LE(r.lo()[0], 2 - 0.05);
  EXPECT_GE(r.hi()[0], 2 + 0.05);
  EXPECT_LE(r.radius()[0], 0.05 * 1.1);
}

TEST(Reach, SegwayThetaDotRadius) {
  const SegwayModel seg;
  const double dt = 0.025;
  const Box r = reachable_box(seg, Vector::Zero(4), dt);
  EXPECT_TRUE(r.contains(Vector::Zero(4)));
  const double expect = dt * std::abs(seg.input_matrix(Vector(Vector::Zero(4)))(3, 0)) *
                        seg.input_bound()[0];
  EXPECT_LE(std::abs(r.radius()[3] - expect), 0.25 * expect);
}

TEST(Reach, SoundnessRandomInputsAndTimes) {
  const SegwayModel seg;
  const double dt = 0.025;
  const Vector x0 = v({0.1, 0.3, 0.08, -0.4});
  const Box r = reachable_box(seg, x0, dt);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> T(0.0, dt);
  std::uniform_real_distribution<double> U(-seg.input_bound()[0], seg.input_bound()[0]);
  for (int i = 0; i < 1000; ++i) {
    const double tau = T(rng);
    const Vector u = v({U(rng)});
    const Vector x = tau > 0 ? integrate_held(seg, x0, u, tau, 4) : x0;
    ASSERT_TRUE(r.contains(x)) << "tau=" << tau << " u=" << u[0];
  }
}

TEST(Reach, MonotoneInInputs) {
  const SegwayModel seg;
  const Box small = reachable_box(seg, Vector::Zero(4), 0.025, Box::symmetric(v({5})));
  const Box big = reachable_box(seg, Vector::Zero(4), 0.025, Box::symmetric(v({20})));
  EXPECT_TRUE(big.contains(small));
}

TEST(Reach, NonContractingThrows) {
  const LinearModel blow(Matrix::Constant(1, 1, 1e6), Matrix::Zero(1, 1), v({1}));
  ReachOptions o;
  o.max_pieces = 2;
  EXPECT_THROW(reachable_box(blow, v({1}), 1.0, o), EnclosureError);
}
