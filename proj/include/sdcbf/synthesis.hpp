#ifndef SDCBF_SYNTHESIS_HPP
#define SDCBF_SYNTHESIS_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "sdcbf/box.hpp"
#include "sdcbf/dynamics.hpp"

namespace sdcbf {

// Linear models xdot = A_i x + B_i u from the extreme points of a state box.
struct VertexFamily {
  std::vector<Matrix> A;
  std::vector<Matrix> B;
  std::vector<Vector> provenance;  // [x; u] each model was taken at

  std::size_t size() const { return A.size(); }
};

// K (m x n, u = K x), P symmetric positive definite, per-vertex decrease
// margins lambda_max(P A_cl + A_cl' P), and the availability radius rho:
// |K x| stays within u_max on {x' P x <= rho^2}.
struct GainCertificate {
  Matrix K;
  Matrix P;
  std::vector<double> margins;
  double rho = 0.0;
  double gamma = 0.0;
};

inline double symmetric_max_eigenvalue(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

inline double symmetric_min_eigenvalue(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Solves A' P + P A = -Q.
inline Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
  const Eigen::Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  // vec(A'P + PA) = (I (x) A' + A' (x) I) vec(P), column-major vec.
  Matrix L = Matrix::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      L.block(i * n, j * n, n, n) += I(i, j) * A.transpose();
      L.block(i * n, j * n, n, n) += A(j, i) * I;
    }
  }
  const Eigen::FullPivLU<Matrix> lu(L);
  if (!lu.isInvertible()) {
    throw SynthesisError("solve_lyapunov: singular Lyapunov operator");
  }
  const Vector q = Eigen::Map<const Vector>((-Q).eval().data(), n * n);
  const Vector p = lu.solve(q);
  Matrix P = Eigen::Map<const Matrix>(p.data(), n, n);
  return 0.5 * (P + P.transpose());
}

// Continuous-time LQR via the stable invariant subspace of the Hamiltonian.
// Returns K with u = K x.
inline Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  const Eigen::Index n = A.rows();
  const Matrix Rinv = R.inverse();
  Matrix H(2 * n, 2 * n);
  H << A, -B * Rinv * B.transpose(), -Q, -A.transpose();
  Eigen::ComplexEigenSolver<Matrix> es(H);
  if (es.info() != Eigen::Success) {
    throw SynthesisError("lqr_gain: Hamiltonian eigen-decomposition failed");
  }
  Eigen::MatrixXcd U(2 * n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    if (es.eigenvalues()[i].real() < -1e-10) {
      if (k == n) {
        throw SynthesisError("lqr_gain: too many stable Hamiltonian eigenvalues");
      }
      U.col(k++) = es.eigenvectors().col(i);
    }
  }
  if (k != n) {
    throw SynthesisError("lqr_gain: pair is not stabilizable (Hamiltonian has eigenvalues on "
                         "the imaginary axis or too few stable ones)");
  }
  const Eigen::MatrixXcd U1 = U.topRows(n);
  const Eigen::MatrixXcd U2 = U.bottomRows(n);
  const Eigen::FullPivLU<Eigen::MatrixXcd> lu(U1);
  if (!lu.isInvertible()) {
    throw SynthesisError("lqr_gain: singular stable subspace basis");
  }
  Matrix P = (U2 * lu.inverse()).real();
  P = 0.5 * (P + P.transpose());
  if (symmetric_min_eigenvalue(P) < -1e-9 * std::max(1.0, P.norm())) {
    throw SynthesisError("lqr_gain: Riccati solution is not positive semidefinite");
  }
  return -Rinv * B.transpose() * P;
}

struct LinearizeOptions {
  double eps_scale = 1e-6;
  double dedup_tol = 1e-9;
};

// Central-difference Jacobian of the drift at x.
template <ControlAffineModel M>
Matrix drift_jacobian(const M& model, const Vector& x, double eps_scale = 1e-6) {
  const Eigen::Index n = x.size();
  Matrix J(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double eps = eps_scale * (1.0 + std::abs(x[j]));
    Vector xp = x;
    Vector xm = x;
    xp[j] += eps;
    xm[j] -= eps;
    J.col(j) = (model.drift(xp) - model.drift(xm)) / (2.0 * eps);
  }
  if (!J.allFinite()) {
    throw SynthesisError("drift_jacobian: non-finite entries at " + format_vector(x));
  }
  return J;
}

// Linearizations at every vertex of the state box and, when given, every
// vertex of the input box: A = d(f + g u)/dx, B = g(x). The input vertices
// make the family cover the (g(x1) - g(x2)) u part of the increment, which a
// u = 0 linearization misses. Duplicates (max-abs distance below dedup_tol)
// are removed; provenance holds [x; u].
template <ControlAffineModel M>
VertexFamily linearize_at_vertices(const M& model, const Box& box, const Box& inputs,
                                   const LinearizeOptions& opts = {}) {
  require_same_dim(box.dim(), model.state_dim(), "linearize_at_vertices");
  require_same_dim(inputs.dim(), model.input_dim(), "linearize_at_vertices inputs");
  const Eigen::Index n = box.dim();
  const Eigen::Index m = inputs.dim();
  if (n + m > 20) {
    throw SynthesisError("linearize_at_vertices: too many vertices");
  }
  // Vertex v of a box, or nothing if v selects the upper end of a
  // degenerate axis (which repeats a lower-end vertex).
  auto vertex = [](const Box& b, std::size_t v, Vector& out) {
    out.resize(b.dim());
    for (Eigen::Index i = 0; i < b.dim(); ++i) {
      const bool upper = (v >> i) & 1U;
      if (upper && b.lo()[i] == b.hi()[i]) {
        return false;
      }
      out[i] = upper ? b.hi()[i] : b.lo()[i];
    }
    return true;
  };
  VertexFamily fam;
  Vector x;
  Vector u;
  for (std::size_t vu = 0; vu < (std::size_t{1} << m); ++vu) {
    if (!vertex(inputs, vu, u)) {
      continue;
    }
    for (std::size_t vx = 0; vx < (std::size_t{1} << n); ++vx) {
      if (!vertex(box, vx, x)) {
        continue;
      }
      Matrix A = drift_jacobian(model, x, opts.eps_scale);
      if (!u.isZero(0.0)) {
        for (Eigen::Index j = 0; j < n; ++j) {
          const double eps = opts.eps_scale * (1.0 + std::abs(x[j]));
          Vector xp = x;
          Vector xm = x;
          xp[j] += eps;
          xm[j] -= eps;
          A.col(j) += (model.input_matrix(xp) - model.input_matrix(xm)) * u / (2.0 * eps);
        }
        if (!A.allFinite()) {
          throw SynthesisError("linearize_at_vertices: non-finite input Jacobian at " +
                               format_vector(x));
        }
      }
      Matrix B = model.input_matrix(x);
      const bool seen = std::any_of(fam.A.begin(), fam.A.end(), [&](const Matrix& Ai) {
        const auto idx = &Ai - fam.A.data();
        return (Ai - A).cwiseAbs().maxCoeff() < opts.dedup_tol &&
               (fam.B[static_cast<std::size_t>(idx)] - B).cwiseAbs().maxCoeff() < opts.dedup_tol;
      });
      if (!seen) {
        Vector where(n + m);
        where << x, u;
        fam.A.push_back(std::move(A));
        fam.B.push_back(std::move(B));
        fam.provenance.push_back(std::move(where));
      }
    }
  }
  return fam;
}

// Drift-only linearization (u = 0).
template <ControlAffineModel M>
VertexFamily linearize_at_vertices(const M& model, const Box& box,
                                   const LinearizeOptions& opts = {}) {
  return linearize_at_vertices(model, box, Box::point(Vector::Zero(model.input_dim())), opts);
}

// max |K_i x| over {x' P x <= 1} is sqrt(K_i P^-1 K_i'); the pre-feedback is
// available on {x' P x <= rho^2} with rho the smallest u_max_i over that.
// Returns +inf when K demands no input.
inline double availability_radius(const Matrix& K, const Matrix& P, const Vector& u_max) {
  require_same_dim(K.rows(), u_max.size(), "availability_radius");
  const Eigen::LLT<Matrix> llt(0.5 * (P + P.transpose()));
  if (llt.info() != Eigen::Success) {
    throw SynthesisError("availability_radius: P is not positive definite");
  }
  double rho = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    const Vector k = K.row(i).transpose();
    const double demand = std::sqrt(k.dot(llt.solve(k)));
    if (demand > 0.0) {
      rho = std::min(rho, u_max[i] / demand);
    }
  }
  return rho;
}

// lambda_max(P (A_i + B_i K) + (A_i + B_i K)' P) per vertex, recomputed from
// scratch. This is the certificate check and shares nothing with the search.
inline std::vector<double> verify_decrease(const GainCertificate& cert,
                                           const VertexFamily& family) {
  std::vector<double> margins;
  margins.reserve(family.size());
  for (std::size_t i = 0; i < family.size(); ++i) {
    const Matrix Acl = family.A[i] + family.B[i] * cert.K;
    margins.push_back(symmetric_max_eigenvalue(cert.P * Acl + Acl.transpose() * cert.P));
  }
  return margins;
}

struct SynthesisOptions {
  // Decay margin: search targets A_cl' P + P A_cl <= -2 gamma P.
  double gamma = 0.05;
  // LQR state weight (identity if empty) and the input weights tried.
  Matrix state_weight;
  std::vector<double> input_weights{0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0};
  int max_iterations = 4000;
};

namespace detail {

struct CommonLyapunov {
  Matrix P;
  double worst = std::numeric_limits<double>::infinity();
};

// Projected subgradient on max_i lambda_max(A_i' P + P A_i + 2 gamma P) over
// {P >= floor, trace P = 1}, started from the Lyapunov solution of the mean
// closed loop.
inline CommonLyapunov common_lyapunov(const std::vector<Matrix>& closed_loops, double gamma,
                                      int max_iterations) {
  const Eigen::Index n = closed_loops.front().rows();
  Matrix mean = Matrix::Zero(n, n);
  for (const auto& A : closed_loops) {
    mean += A;
  }
  mean /= static_cast<double>(closed_loops.size());

  Matrix P = Matrix::Identity(n, n);
  try {
    Matrix L = solve_lyapunov(mean, Matrix::Identity(n, n));
    if (symmetric_min_eigenvalue(L) > 0.0) {
      P = L;
    }
  } catch (const SynthesisError&) {
  }
  P /= P.trace();

  auto evaluate = [&](const Matrix& Pc, Vector* top, std::size_t* arg) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < closed_loops.size(); ++i) {
      const Matrix& A = closed_loops[i];
      const Matrix S = A.transpose() * Pc + Pc * A + 2.0 * gamma * Pc;
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
      const double lam = es.eigenvalues()[n - 1];
      if (lam > worst) {
        worst = lam;
        if (top) {
          *top = es.eigenvectors().col(n - 1);
        }
        if (arg) {
          *arg = i;
        }
      }
    }
    return worst;
  };

  CommonLyapunov best{P, evaluate(P, nullptr, nullptr)};
  const double floor = 1e-6;
  double step = 0.05;
  for (int it = 0; it < max_iterations && best.worst > 0.0; ++it) {
    Vector v;
    std::size_t arg = 0;
    const double worst = evaluate(P, &v, &arg);
    if (worst < best.worst) {
      best = {P, worst};
    }
    if (worst <= 0.0) {
      break;
    }
    const Matrix& A = closed_loops[arg];
    const Vector Av = A * v;
    Matrix G = Av * v.transpose() + v * Av.transpose() + 2.0 * gamma * v * v.transpose();
    G = 0.5 * (G + G.transpose());
    const double gn = G.norm();
    if (gn == 0.0) {
      break;
    }
    P -= (step / std::sqrt(1.0 + it / 50.0)) * G / gn;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (P + P.transpose()));
    Vector ev = es.eigenvalues().cwiseMax(floor);
    P = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    P /= P.trace();
  }
  const double last = evaluate(P, nullptr, nullptr);
  if (last < best.worst) {
    best = {P, last};
  }
  return best;
}

}  // namespace detail

// Pre-feedback search. Candidate gains come from LQR on the mean vertex
// model under a sweep of input weights (plus K = 0); for each, a common
// quadratic Lyapunov function is sought across all vertices. Among feasible
// candidates the one with the largest availability radius wins. Optimality
// of the radius is not claimed; feasibility is certified by verify_decrease.
inline GainCertificate synthesize_gain(const VertexFamily& family, const Vector& u_max,
                                       const SynthesisOptions& opts = {}) {
  if (family.size() == 0) {
    throw SynthesisError("synthesize_gain: empty vertex family");
  }
  const Eigen::Index n = family.A.front().rows();
  const Eigen::Index m = family.B.front().cols();
  Matrix A_mean = Matrix::Zero(n, n);
  Matrix B_mean = Matrix::Zero(n, m);
  for (std::size_t i = 0; i < family.size(); ++i) {
    A_mean += family.A[i];
    B_mean += family.B[i];
  }
  A_mean /= static_cast<double>(family.size());
  B_mean /= static_cast<double>(family.size());
  const Matrix Q = opts.state_weight.size() ? opts.state_weight : Matrix::Identity(n, n);

  std::vector<Matrix> candidates{Matrix::Zero(m, n)};
  for (double w : opts.input_weights) {
    try {
      candidates.push_back(lqr_gain(A_mean, B_mean, Q, w * Matrix::Identity(m, m)));
    } catch (const SynthesisError&) {
    }
  }

  bool found = false;
  GainCertificate best;
  double best_worst = std::numeric_limits<double>::infinity();
  for (const Matrix& K : candidates) {
    std::vector<Matrix> closed;
    for (std::size_t i = 0; i < family.size(); ++i) {
      closed.push_back(family.A[i] + family.B[i] * K);
    }
    const detail::CommonLyapunov cl = detail::common_lyapunov(closed, opts.gamma, opts.max_iterations);
    best_worst = std::min(best_worst, cl.worst);
    if (cl.worst > 0.0) {
      continue;
    }
    GainCertificate cert;
    cert.K = K;
    cert.P = cl.P;
    cert.gamma = opts.gamma;
    cert.margins = verify_decrease(cert, family);
    if (*std::max_element(cert.margins.begin(), cert.margins.end()) > 0.0) {
      continue;
    }
    cert.rho = availability_radius(K, cert.P, u_max);
    if (!found || cert.rho > best.rho) {
      best = cert;
      found = true;
    }
    // With K = 0 feasible nothing needs to be spent on pre-feedback.
    if (K.isZero(0.0)) {
      break;
    }
  }
  if (!found) {
    std::ostringstream os;
    os << "synthesize_gain: no candidate gain admits a common Lyapunov function; best worst-vertex "
          "margin "
       << best_worst;
    throw SynthesisError(os.str());
  }
  return best;
}

// xdot = f(x) + g(x) (u + K x): the model seen through the pre-feedback loop.
template <ControlAffineModel M>
class PrefeedbackModel {
 public:
  PrefeedbackModel(M model, Matrix K) : model_(std::move(model)), K_(std::move(K)) {}

  Eigen::Index state_dim() const { return model_.state_dim(); }
  Eigen::Index input_dim() const { return model_.input_dim(); }
  const Vector& input_bound() const { return model_.input_bound(); }

  template <class T>
  VecT<T> drift(const VecT<T>& x) const {
    VecT<T> f = model_.drift(x);
    const MatT<T> g = model_.input_matrix(x);
    const VecT<T> kx = mat_vec<T>(K_, x);
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      for (Eigen::Index j = 0; j < kx.size(); ++j) {
        f[i] = f[i] + g(i, j) * kx[j];
      }
    }
    return f;
  }
  template <class T>
  MatT<T> input_matrix(const VecT<T>& x) const {
    return model_.input_matrix(x);
  }

 private:
  M model_;
  Matrix K_;
};

// Largest one-step increase of V(e) = e' P e, e = x1 - x2, when both states
// are driven by the same piecewise-constant input sequence (inputs are
// applied directly, without saturation).
template <ControlAffineModel M>
double max_lyapunov_increase(const M& model, const Matrix& P, Vector x1, Vector x2,
                             const std::vector<Vector>& inputs, double dt, int substeps = 1) {
  auto V = [&](const Vector& a, const Vector& b) {
    const Vector e = a - b;
    return e.dot(P * e);
  };
  double worst = -std::numeric_limits<double>::infinity();
  double v_prev = V(x1, x2);
  const double h = dt / substeps;
  for (const Vector& u : inputs) {
    for (int s = 0; s < substeps; ++s) {
      auto rk4 = [&](const Vector& x) {
        auto rhs = [&](const Vector& y) -> Vector {
          return model.drift(y) + model.input_matrix(y) * u;
        };
        const Vector k1 = rhs(x);
        const Vector k2 = rhs(x + 0.5 * h * k1);
        const Vector k3 = rhs(x + 0.5 * h * k2);
        const Vector k4 = rhs(x + h * k3);
        return Vector(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
      };
      x1 = rk4(x1);
      x2 = rk4(x2);
      const double v = V(x1, x2);
      worst = std::max(worst, v - v_prev);
      v_prev = v;
    }
  }
  return worst;
}

inline std::vector<double> row_major(const Matrix& M) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(M.size()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      out.push_back(M(i, j));
    }
  }
  return out;
}

inline Matrix from_row_major(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
    throw DimensionError("from_row_major: expected " + std::to_string(rows * cols) +
                         " entries, got " + std::to_string(v.size()));
  }
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      M(i, j) = v[static_cast<std::size_t>(i * cols + j)];
    }
  }
  return M;
}

// Certificate file schema (JSON):
//   { "n": int, "m": int, "K": [m*n row-major], "P": [n*n row-major],
//     "rho": number or null (unbounded), "gamma": number, "margins": [..] }
inline nlohmann::json to_json(const GainCertificate& cert) {
  nlohmann::json j;
  j["n"] = cert.P.rows();
  j["m"] = cert.K.rows();
  j["K"] = row_major(cert.K);
  j["P"] = row_major(cert.P);
  j["rho"] = std::isfinite(cert.rho) ? nlohmann::json(cert.rho) : nlohmann::json(nullptr);
  j["gamma"] = cert.gamma;
  j["margins"] = cert.margins;
  return j;
}

inline GainCertificate certificate_from_json(const nlohmann::json& j) {
  GainCertificate cert;
  try {
    const auto n = j.at("n").get<Eigen::Index>();
    const auto m = j.at("m").get<Eigen::Index>();
    cert.K = from_row_major(j.at("K").get<std::vector<double>>(), m, n);
    cert.P = from_row_major(j.at("P").get<std::vector<double>>(), n, n);
    cert.rho = j.at("rho").is_null() ? std::numeric_limits<double>::infinity()
                                     : j.at("rho").get<double>();
    cert.gamma = j.value("gamma", 0.0);
    cert.margins = j.value("margins", std::vector<double>{});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("gain certificate: ") + e.what());
  }
  return cert;
}

inline void save_certificate(const GainCertificate& cert, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write gain certificate to " + path);
  }
  out << to_json(cert).dump(2) << '\n';
}

inline GainCertificate load_certificate(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read gain certificate " + path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("gain certificate " + path + ": " + e.what());
  }
  return certificate_from_json(j);
}

}  // namespace sdcbf

#endif  // SDCBF_SYNTHESIS_HPP
