#ifndef SDCBF_TESTS_CHECKS_HPP
#define SDCBF_TESTS_CHECKS_HPP

// Property checks shared by the unit tests and the acceptance binary. Each
// returns counts or worst-case values so callers choose how to report.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "sdcbf/sdcbf.hpp"

namespace sdcbf::check {

inline Vector uniform_in(const Box& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Vector s(b.dim());
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = U(rng);
  return b.at(s);
}

// Uniform sample of {x : x' P x <= level}.
inline Vector uniform_in_ellipsoid(const Matrix& P, double level, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto n = P.rows();
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = N(rng);
  z *= std::pow(U(rng), 1.0 / static_cast<double>(n)) * std::sqrt(level) / z.norm();
  const Eigen::LLT<Matrix> llt(P);
  return llt.matrixU().solve(z);  // x' P x = z' z
}

// Simulated states at random (tau, u) that fall outside reachable_box.
template <ControlAffineModel M>
int reach_violations(const M& model, const Vector& x0, double dt, int samples,
                     std::mt19937_64& rng) {
  const Box r = reachable_box(model, x0, dt);
  const Box U = input_box(model);
  std::uniform_real_distribution<double> T(0.0, dt);
  int bad = 0;
  for (int i = 0; i < samples; ++i) {
    const double tau = T(rng);
    const Vector u = uniform_in(U, rng);
    const Vector x = tau > 0.0 ? integrate_held(model, x0, u, tau, 4) : x0;
    bad += r.contains(x) ? 0 : 1;
  }
  return bad;
}

struct SoundnessTally {
  std::size_t rows = 0;
  std::size_t samples = 0;
  std::size_t admitted = 0;    // samples whose u satisfied the affine row
  std::size_t violations = 0;  // admitted samples with a negative realized condition
};

// Robust rows at (x0, delta) against realizations: any start state in the
// reachable box plus delta, any flow-point shift in delta and any admissible
// input. An input the row admits must make the realized condition
// dh Phi (f + g u) + lambda h nonnegative.
template <ControlAffineModel M>
SoundnessTally robust_soundness(const M& model, const SafetySpec& spec, const BackupController& backup,
                                const Vector& x0, const Box& delta, double dt, int samples,
                                std::mt19937_64& rng) {
  const auto steps = horizon_steps(spec.horizon, dt);
  const auto traj = flow_with_sensitivity(model, x0, backup, dt, steps);
  const Box X0 = box_sum(reachable_box(model, x0, dt), delta);
  const auto rows = build_constraints(model, x0, delta, traj, spec, dt);
  const Box U = input_box(model);
  SoundnessTally t;
  t.rows = rows.size();
  for (const auto& r : rows) {
    const QuadraticBarrier& h = r.source == ConstraintSource::Safe ? spec.safe : spec.backup_set;
    for (int k = 0; k < samples; ++k) {
      ++t.samples;
      const Vector u = uniform_in(U, rng);
      if (!r.satisfied(u)) continue;
      ++t.admitted;
      const Vector x = uniform_in(X0, rng);
      const Vector p = traj.base.states[r.step] + uniform_in(delta, rng);
      const Vector gp = traj.cumulative[r.step].transpose() * h.gradient<double>(p);
      const double realized =
          gp.dot(model.drift(x) + model.input_matrix(x) * u) + spec.lambda * h(p);
      t.violations += realized < 0.0 ? 1 : 0;
    }
  }
  return t;
}

struct IdentityTally {
  double max_ratio = 0.0;  // max over trials of max|Kx| / sqrt(K P^-1 K')
  double min_ratio = 1.0;  // min over trials of the same
};

// max |K x| over {x' P x <= 1} equals sqrt(K P^-1 K'): brute force over
// random (K, P) of dimension 2 to 4, sampling the boundary of the set.
inline IdentityTally availability_identity(int trials, int samples, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_int_distribution<int> dim(2, 4);
  IdentityTally t;
  for (int k = 0; k < trials; ++k) {
    const int n = dim(rng);
    Matrix R(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) R(i, j) = N(rng);
    const Matrix P = R * R.transpose() + 0.1 * Matrix::Identity(n, n);
    Matrix K(1, n);
    for (int j = 0; j < n; ++j) K(0, j) = N(rng);
    const double bound = 1.0 / availability_radius(K, P, Vector::Ones(1));
    const Eigen::LLT<Matrix> llt(P);
    // Half the samples uniform on the boundary sphere (in P-whitened
    // coordinates), half as a shrinking random search around the incumbent;
    // uniform sampling alone reaches 0.999 too rarely in 4-D.
    double best = 0.0;
    Vector z_best = Vector::Zero(n);
    auto value = [&](const Vector& z) { return std::abs((K * Vector(llt.matrixU().solve(z)))(0)); };
    for (int s = 0; s < samples; ++s) {
      Vector z(n);
      for (int i = 0; i < n; ++i) z[i] = N(rng);
      if (s >= samples / 2) {
        const double sigma = 0.2 * std::pow(1e-4, double(s - samples / 2) / (samples - samples / 2));
        z = z_best + sigma * z;
      }
      z /= z.norm();
      const double val = value(z);
      if (val > best) {
        best = val;
        z_best = z;
      }
    }
    t.max_ratio = std::max(t.max_ratio, best / bound);
    t.min_ratio = std::min(t.min_ratio, best / bound);
  }
  return t;
}

struct ContractionTally {
  std::size_t pairs = 0;
  std::size_t steps = 0;
  double worst_increase = -std::numeric_limits<double>::infinity();
};

// Vertex-linear closed loops: V(e) = e' P e along pairs driven by the same
// random input signal must not increase (relative rounding slack only).
inline ContractionTally vertex_contraction(const GainCertificate& cert, const VertexFamily& fam,
                                           const Vector& u_max, double level, int pairs,
                                           std::mt19937_64& rng) {
  ContractionTally t;
  std::uniform_int_distribution<std::size_t> pick(0, fam.size() - 1);
  const Box U = Box::symmetric(u_max);
  for (int k = 0; k < pairs; ++k) {
    const std::size_t i = pick(rng);
    const LinearModel lin(fam.A[i] + fam.B[i] * cert.K, fam.B[i]);
    Vector a = uniform_in_ellipsoid(cert.P, level, rng);
    Vector b = uniform_in_ellipsoid(cert.P, level, rng);
    ++t.pairs;
    for (int s = 0; s < 40; ++s) {
      const Vector u = uniform_in(U, rng);
      const double v0 = (a - b).dot(cert.P * (a - b));
      a = step_zoh(lin, a, u, 0.025);
      b = step_zoh(lin, b, u, 0.025);
      const double v1 = (a - b).dot(cert.P * (a - b));
      t.worst_increase = std::max(t.worst_increase, (v1 - v0) / std::max(v0, 1e-300));
      ++t.steps;
    }
  }
  return t;
}

// Nonlinear plant with the pre-feedback: same check on pairs inside the
// availability set, counted while both states stay inside the certified box
// and the availability set (the region the vertex family speaks for).
template <ControlAffineModel M>
ContractionTally nonlinear_contraction(const M& plant, const Matrix& P, double level,
                                       const Box& certified, const Vector& u_max, int pairs,
                                       std::mt19937_64& rng) {
  auto inside = [&](const Vector& x) {
    if (x.dot(P * x) > level) return false;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (certified.lo()[i] < certified.hi()[i] && !certified[i].contains(x[i])) return false;
    }
    return true;
  };
  ContractionTally t;
  const Box U = Box::symmetric(u_max);
  while (static_cast<int>(t.pairs) < pairs) {
    Vector a = uniform_in_ellipsoid(P, level, rng);
    Vector b = uniform_in_ellipsoid(P, level, rng);
    if (!inside(a) || !inside(b)) continue;
    ++t.pairs;
    for (int s = 0; s < 160; ++s) {
      const Vector u = uniform_in(U, rng);
      const Vector a2 = step_zoh(plant, a, u, 0.025 / 4);
      const Vector b2 = step_zoh(plant, b, u, 0.025 / 4);
      if (!inside(a2) || !inside(b2)) break;
      const double v0 = (a - b).dot(P * (a - b));
      const double v1 = (a2 - b2).dot(P * (a2 - b2));
      t.worst_increase = std::max(t.worst_increase, v1 - v0);
      ++t.steps;
      a = a2;
      b = b2;
    }
  }
  return t;
}

}  // namespace sdcbf::check

#endif  // SDCBF_TESTS_CHECKS_HPP
