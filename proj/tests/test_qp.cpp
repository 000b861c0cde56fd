#include <gtest/gtest.h>

#include <random>

#include "qp_oracle.hpp"
#include "sdcbf/qp.hpp"

using namespace sdcbf;

namespace {

Vector v(std::initializer_list<double> xs) {
  Vector r(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) r[i++] = x;
  return r;
}

FilterProblem problem(Vector u_des, Matrix A, Vector b, Vector u_max) {
  return FilterProblem{std::move(u_des), std::move(A), std::move(b), std::move(u_max)};
}

}  // namespace

TEST(Qp, UnconstrainedInterior) {
  const auto p = problem(v({0.3}), Matrix(0, 1), Vector(0), v({1}));
  const QpResult r = solve_filter_qp(p);
  ASSERT_EQ(r.status, QpStatus::Optimal);
  EXPECT_EQ(r.u, v({0.3}));
}

TEST(Qp, HalfSpaceClamp) {
  const auto p = problem(v({0}), Matrix::Constant(1, 1, 1.0), v({-0.5}), v({1}));
  const QpResult r = solve_filter_qp(p);
  ASSERT_EQ(r.status, QpStatus::Optimal);
  EXPECT_NEAR(r.u[0], 0.5, 1e-15);
  EXPECT_TRUE(check_kkt(p, r).optimal_certified());
}

TEST(Qp, TwoDimensionalProjection) {
  Matrix A(1, 2);
  A << -1, -1;
  const auto p = problem(v({1, 1}), A, v({1}), v({2, 2}));
  const QpResult r = solve_filter_qp(p);
  ASSERT_EQ(r.status, QpStatus::Optimal);
  EXPECT_NEAR(r.u[0], 0.5, 1e-8);
  EXPECT_NEAR(r.u[1], 0.5, 1e-8);
  const auto g = oracle::grid_oracle(p);
  ASSERT_TRUE(g);
  EXPECT_LT((*g - r.u).norm(), 2e-3);
}

TEST(Qp, BoundsClip) {
  const auto p = problem(v({5}), Matrix(0, 1), Vector(0), v({1}));
  const QpResult r = solve_filter_qp(p);
  EXPECT_EQ(r.u[0], 1.0);
  EXPECT_TRUE(check_kkt(p, r).optimal_certified());
}

TEST(Qp, InfeasibleCertified) {
  const auto p = problem(v({0}), Matrix::Constant(1, 1, 1.0), v({-2}), v({1}));  // u >= 2
  const QpResult r = solve_filter_qp(p);
  ASSERT_EQ(r.status, QpStatus::Infeasible);
  EXPECT_TRUE(check_kkt(p, r).infeasible_certified());
}

TEST(Qp, IdempotentOnSafeInputs) {
  Matrix A(2, 1);
  A << 1, -1;
  const auto p = problem(v({0.1234567}), A, v({1, 1}), v({2}));
  EXPECT_EQ(solve_filter_qp(p).u[0], 0.1234567);
}

TEST(Qp, DimensionErrors) {
  EXPECT_THROW(solve_filter_qp(problem(v({0}), Matrix(1, 2), v({0}), v({1}))), DimensionError);
  EXPECT_THROW(solve_filter_qp(problem(v({0}), Matrix(0, 1), Vector(0), v({-1}))), DimensionError);
}

TEST(Qp, RandomProblemsCertifiedAndMatchOracle) {
  std::mt19937_64 rng(2024);
  int optimal = 0, infeasible = 0;
  for (int k = 0; k < 2000; ++k) {
    const FilterProblem p = oracle::random_problem(rng);
    const QpResult r = solve_filter_qp(p);
    const KktReport rep = check_kkt(p, r);
    const auto g = oracle::grid_oracle(p);
    if (r.status == QpStatus::Optimal) {
      ++optimal;
      ASSERT_TRUE(rep.optimal_certified()) << "problem " << k;
      if (g) {
        ASSERT_LT((*g - r.u).norm(), 2e-3) << "problem " << k;
      }
    } else {
      ++infeasible;
      ASSERT_TRUE(rep.infeasible_certified()) << "problem " << k;
      ASSERT_FALSE(g) << "problem " << k;
    }
  }
  EXPECT_GT(optimal, 100);
  EXPECT_GT(infeasible, 10);
}

TEST(Qp, FullActiveSetTakesNoPrimalStep) {
  // Found by random search: with two rows active in 2-D, a rounding-level
  // residual direction once produced a step to u = (0.86, 8.9e4).
  FilterProblem p;
  p.A.resize(11, 2);
  p.A << 0.04486071720639731, -0.43623734152616334, 1.3715780938594055, 1.1437135058013632,
      -2.1208868924238815, -1.4298966934060886, -0.41190244221499916, 0.59012673589338716,
      0.76127120199802256, 0.24796737846678407, 0.71279979854322451, 0.48047078436981489,
      -1.9080461177294759, 0.96017341765271658, 0.29286631635934485, 1.5878456975455704,
      1.2381143513607342, 1.5475480827089041, -0.82910582856462833, 0.30397231700467586,
      -0.98222943754186387, 1.241408302207323;
  p.b.resize(11);
  p.b << 0.90223206178229109, -0.50484241707153243, -1.5721944361173064, 0.41687565261118659,
      1.334672024239651, -0.18753327978657142, -0.20180478785804312, -0.24957008320500496,
      1.1279802631119211, -0.034045977275273476, -1.4271270232257889;
  p.u_des.resize(2);
  p.u_des << -1.1913594335193389, 1.2155274014531647;
  p.u_max.resize(2);
  p.u_max << 0.85675947619045278, 1.7699079284283521;
  const QpResult r = solve_filter_qp(p);
  const KktReport rep = check_kkt(p, r);
  if (r.status == QpStatus::Optimal) {
    EXPECT_TRUE(rep.optimal_certified());
  } else {
    EXPECT_TRUE(rep.infeasible_certified());
  }
  EXPECT_EQ(r.status == QpStatus::Optimal, oracle::grid_oracle(p).has_value());
}
