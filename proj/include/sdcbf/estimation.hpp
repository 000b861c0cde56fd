#ifndef SDCBF_ESTIMATION_HPP
#define SDCBF_ESTIMATION_HPP

#include <spdlog/spdlog.h>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "sdcbf/box.hpp"
#include "sdcbf/dynamics.hpp"
#include "sdcbf/sensitivity.hpp"

namespace sdcbf {

// z = H x + v, v ~ N(0, diag(std^2)), drawn from a seeded generator.
class SensorModel {
 public:
  SensorModel(Matrix H, Vector noise_std, std::uint64_t seed)
      : H_(std::move(H)), std_(std::move(noise_std)), rng_(seed) {
    require_same_dim(H_.rows(), std_.size(), "SensorModel noise");
    if ((std_.array() < 0.0).any()) {
      throw EstimationError("SensorModel: negative noise std");
    }
  }

  // Encoder on p, IMU on theta and theta-dot.
  static Matrix segway_channels() {
    Matrix H = Matrix::Zero(3, 4);
    H(0, 0) = 1.0;
    H(1, 2) = 1.0;
    H(2, 3) = 1.0;
    return H;
  }

  const Matrix& H() const { return H_; }
  const Vector& noise_std() const { return std_; }
  Eigen::Index channels() const { return H_.rows(); }

  Vector measure(const Vector& x) {
    require_same_dim(x.size(), H_.cols(), "SensorModel::measure");
    Vector z = H_ * x;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (std_[i] > 0.0) {
        z[i] += std_[i] * normal_(rng_);
      }
    }
    return z;
  }

  Vector measure_noiseless(const Vector& x) const { return H_ * x; }

 private:
  Matrix H_;
  Vector std_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct EkfState {
  Vector mean;
  Matrix cov;
};

namespace detail {

inline Matrix clamp_psd(const Matrix& S, const char* where) {
  Matrix sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.eigenvalues().minCoeff() < -1e-12) {
    spdlog::warn("{}: covariance lost positive semidefiniteness (min eigenvalue {:.3e}); "
                 "clamping",
                 where, es.eigenvalues().minCoeff());
    const Vector ev = es.eigenvalues().cwiseMax(0.0);
    sym = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    sym = 0.5 * (sym + sym.transpose()).eval();
  }
  return sym;
}

}  // namespace detail

// Mean through the held-input flow, covariance through its finite-difference
// Jacobian: F S F' + Q_d.
template <ControlAffineModel M>
EkfState ekf_predict(const M& model, const EkfState& est, const Vector& u_held, double dt,
                     const Matrix& Q_d, const SensitivityOptions& opts = {}) {
  if (!(dt > 0.0)) {
    throw EstimationError("ekf_predict: dt must be positive");
  }
  require_same_dim(est.cov.rows(), est.mean.size(), "ekf_predict covariance");
  require_same_dim(Q_d.rows(), est.mean.size(), "ekf_predict Q_d");
  const Matrix F = step_jacobian(model, est.mean, u_held, dt, opts);
  EkfState out;
  out.mean = integrate_held(model, est.mean, u_held, dt, opts.substeps);
  out.cov = detail::clamp_psd(F * est.cov * F.transpose() + Q_d, "ekf_predict");
  return out;
}

// Standard update with the Joseph-form covariance. Channels with infinite
// noise std carry no information and are dropped.
inline EkfState ekf_update(const EkfState& est, const Vector& z, const Matrix& H,
                           const Vector& noise_std) {
  require_same_dim(z.size(), H.rows(), "ekf_update measurement");
  require_same_dim(noise_std.size(), H.rows(), "ekf_update noise");
  require_same_dim(H.cols(), est.mean.size(), "ekf_update H");
  std::vector<Eigen::Index> used;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (std::isfinite(noise_std[i])) {
      used.push_back(i);
    }
  }
  if (used.empty()) {
    return est;
  }
  const auto k = static_cast<Eigen::Index>(used.size());
  const Eigen::Index n = est.mean.size();
  Matrix Hs(k, n);
  Vector zs(k);
  Matrix R = Matrix::Zero(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    Hs.row(r) = H.row(used[r]);
    zs[r] = z[used[r]];
    R(r, r) = noise_std[used[r]] * noise_std[used[r]];
  }
  const Matrix S = Hs * est.cov * Hs.transpose() + R;
  const Eigen::FullPivLU<Matrix> lu(S);
  if (!lu.isInvertible()) {
    throw EstimationError("ekf_update: singular innovation covariance");
  }
  const Matrix K = est.cov * Hs.transpose() * lu.inverse();
  EkfState out;
  out.mean = est.mean + K * (zs - Hs * est.mean);
  const Matrix I_KH = Matrix::Identity(n, n) - K * Hs;
  out.cov = detail::clamp_psd(I_KH * est.cov * I_KH.transpose() + K * R * K.transpose(),
                              "ekf_update");
  return out;
}

// +-c sqrt(S_ii) per axis around the origin, each radius capped.
inline Box uncertainty_box(const EkfState& est, double c, const Vector& caps) {
  if (!(c > 0.0)) {
    throw EstimationError("uncertainty_box: confidence scale must be positive");
  }
  const Eigen::Index n = est.mean.size();
  Vector r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r[i] = c * std::sqrt(std::max(0.0, est.cov(i, i)));
    if (caps.size() == n) {
      r[i] = std::min(r[i], caps[i]);
    }
  }
  return Box::symmetric(r);
}

inline Box uncertainty_box(const EkfState& est, double c) {
  return uncertainty_box(est, c, Vector());
}

}  // namespace sdcbf

#endif  // SDCBF_ESTIMATION_HPP
