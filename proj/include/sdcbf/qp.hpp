#ifndef SDCBF_QP_HPP
#define SDCBF_QP_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sdcbf/box.hpp"
#include "sdcbf/errors.hpp"

namespace sdcbf {

// minimize |u - u_des|^2  s.t.  A u + b >= 0,  -u_max <= u <= u_max.
struct FilterProblem {
  Vector u_des;
  Matrix A;  // one row per constraint
  Vector b;
  Vector u_max;

  Eigen::Index input_dim() const { return u_des.size(); }
  Eigen::Index num_constraints() const { return A.rows(); }

  void validate() const {
    require_same_dim(A.cols(), u_des.size(), "FilterProblem A");
    require_same_dim(A.rows(), b.size(), "FilterProblem b");
    require_same_dim(u_max.size(), u_des.size(), "FilterProblem u_max");
    if ((u_max.array() < 0.0).any()) {
      throw DimensionError("FilterProblem: empty input box (negative u_max)");
    }
  }
};

enum class QpStatus { Optimal, Infeasible };

struct QpResult {
  QpStatus status = QpStatus::Infeasible;
  Vector u;
  // Multipliers over the stacked rows: the problem's rows, then the upper
  // bounds (u_max - u >= 0), then the lower bounds (u + u_max >= 0).
  Vector multipliers;
  // For Infeasible: y >= 0 with sum y_i n_i = 0 and sum y_i b_i < 0 over the
  // stacked rows, i.e. a Farkas certificate.
  Vector farkas;
  std::vector<int> active;
  int iterations = 0;
};

namespace detail {

// Stacked constraint rows N' u + c >= 0 (problem rows then finite bounds).
struct StackedRows {
  Matrix normals;  // m x total, one column per row
  Vector offsets;
};

inline StackedRows stack_rows(const FilterProblem& p) {
  const Eigen::Index m = p.input_dim();
  const Eigen::Index k = p.num_constraints();
  StackedRows s;
  s.normals = Matrix::Zero(m, k + 2 * m);
  s.offsets = Vector::Zero(k + 2 * m);
  s.normals.leftCols(k) = p.A.transpose();
  s.offsets.head(k) = p.b;
  for (Eigen::Index j = 0; j < m; ++j) {
    s.normals(j, k + j) = -1.0;
    s.offsets[k + j] = p.u_max[j];
    s.normals(j, k + m + j) = 1.0;
    s.offsets[k + m + j] = p.u_max[j];
  }
  return s;
}

}  // namespace detail

struct QpOptions {
  double feasibility_tol = 1e-12;
  int max_iterations = 1000;
};

// Dual active-set method (Goldfarb-Idnani) for the identity-Hessian QP. It
// starts from the unconstrained optimum u_des and adds violated rows one at a
// time, so an already-feasible u_des is returned untouched, and an empty
// feasible set is detected with a Farkas certificate.
inline QpResult solve_filter_qp(const FilterProblem& problem, const QpOptions& opts = {}) {
  problem.validate();
  const detail::StackedRows rows = detail::stack_rows(problem);
  const Eigen::Index m = problem.input_dim();
  const Eigen::Index total = rows.normals.cols();
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::vector<Eigen::Index> usable;
  for (Eigen::Index i = 0; i < total; ++i) {
    if (std::isfinite(rows.offsets[i])) {
      usable.push_back(i);
    }
  }

  QpResult res;
  res.u = problem.u_des;
  std::vector<Eigen::Index> active;
  std::vector<double> lambda;
  auto slack = [&](Eigen::Index i) { return rows.normals.col(i).dot(res.u) + rows.offsets[i]; };
  auto is_active = [&](Eigen::Index i) {
    return std::find(active.begin(), active.end(), i) != active.end();
  };

  int iterations = 0;
  while (true) {
    // Most violated row, measured as signed distance to its hyperplane.
    Eigen::Index p = -1;
    double worst = 0.0;
    for (Eigen::Index i : usable) {
      if (is_active(i)) {
        continue;
      }
      const double nrm = rows.normals.col(i).norm();
      const double s = slack(i);
      const double tol = opts.feasibility_tol * (1.0 + std::abs(rows.offsets[i]));
      if (nrm == 0.0) {
        if (s < -tol) {
          p = i;  // 0'u + b >= 0 with b < 0: infeasible on its own
          worst = -inf;
        }
        continue;
      }
      if (s < -tol && s / nrm < worst) {
        worst = s / nrm;
        p = i;
      }
    }
    if (p < 0) {
      res.status = QpStatus::Optimal;
      break;
    }

    const Vector np = rows.normals.col(p);
    double lambda_p = 0.0;
    while (true) {
      if (++iterations > opts.max_iterations) {
        throw SolverError("solve_filter_qp: iteration limit reached (cycling?)");
      }
      const auto q = static_cast<Eigen::Index>(active.size());
      Vector r = Vector::Zero(q);
      Vector z = np;
      if (q > 0) {
        Matrix N(m, q);
        for (Eigen::Index j = 0; j < q; ++j) {
          N.col(j) = rows.normals.col(active[j]);
        }
        r = N.colPivHouseholderQr().solve(np);
        z = np - N * r;
      }
      // With m independent rows active the primal direction is zero; only
      // rounding can make it otherwise, and a step along it is meaningless.
      const double z_scale = 1e-12 * std::max(1.0, np.norm());
      const bool z_zero = q >= m || z.norm() <= z_scale;

      double t1 = inf;
      Eigen::Index drop = -1;
      for (Eigen::Index j = 0; j < q; ++j) {
        if (r[j] > 1e-14) {
          const double ratio = lambda[j] / r[j];
          if (ratio < t1) {
            t1 = ratio;
            drop = j;
          }
        }
      }
      double t2 = inf;
      if (!z_zero) {
        t2 = -slack(p) / z.dot(np);
      }

      if (!std::isfinite(t1) && !std::isfinite(t2)) {
        // n_p = N r with r <= 0: y_p = 1, y_active = -r certifies infeasibility.
        res.status = QpStatus::Infeasible;
        res.farkas = Vector::Zero(total);
        res.farkas[p] = 1.0;
        for (Eigen::Index j = 0; j < q; ++j) {
          res.farkas[active[j]] = std::max(0.0, -r[j]);
        }
        res.iterations = iterations;
        res.active.assign(active.begin(), active.end());
        res.multipliers = Vector::Zero(total);
        return res;
      }

      if (!std::isfinite(t2)) {
        // Dual-only step, then drop the blocking row.
        for (Eigen::Index j = 0; j < q; ++j) {
          lambda[j] -= t1 * r[j];
        }
        lambda_p += t1;
        active.erase(active.begin() + drop);
        lambda.erase(lambda.begin() + drop);
        continue;
      }

      const double t = std::min(t1, t2);
      res.u += t * z;
      for (Eigen::Index j = 0; j < q; ++j) {
        lambda[j] -= t * r[j];
      }
      lambda_p += t;
      if (t2 <= t1) {
        active.push_back(p);
        lambda.push_back(lambda_p);
        break;
      }
      active.erase(active.begin() + drop);
      lambda.erase(lambda.begin() + drop);
    }
  }

  res.iterations = iterations;
  res.multipliers = Vector::Zero(total);
  for (std::size_t j = 0; j < active.size(); ++j) {
    res.multipliers[active[j]] = std::max(0.0, lambda[j]);
  }
  res.active.assign(active.begin(), active.end());
  return res;
}

// First-order optimality residuals of a result; the certificate checker for
// solve_filter_qp, computed without reference to the solver's internals.
struct KktReport {
  double stationarity = 0.0;     // |u - u_des - sum lambda_i n_i|
  double primal_violation = 0.0; // max(0, -(n_i'u + b_i))
  double dual_min = 0.0;         // min lambda_i
  double complementarity = 0.0;  // max |lambda_i (n_i'u + b_i)|
  // Infeasibility certificate quality (Infeasible results only).
  double farkas_residual = 0.0;  // |sum y_i n_i|
  double farkas_value = 0.0;     // sum y_i b_i, must be < 0
  double farkas_min = 0.0;       // min y_i

  bool optimal_certified(double stat_tol = 1e-8, double primal_tol = 1e-10,
                         double dual_tol = 1e-12, double comp_tol = 1e-8) const {
    return stationarity < stat_tol && primal_violation < primal_tol && dual_min >= -dual_tol &&
           complementarity < comp_tol;
  }
  bool infeasible_certified(double tol = 1e-9) const {
    return farkas_min >= -1e-12 && farkas_value < 0.0 &&
           farkas_residual <= tol * std::max(1.0, std::abs(farkas_value)) &&
           farkas_residual < std::abs(farkas_value);
  }
};

inline KktReport check_kkt(const FilterProblem& problem, const QpResult& res) {
  const detail::StackedRows rows = detail::stack_rows(problem);
  KktReport rep;
  if (res.status == QpStatus::Optimal) {
    Vector stat = res.u - problem.u_des;
    for (Eigen::Index i = 0; i < rows.normals.cols(); ++i) {
      const double lam = res.multipliers[i];
      const double s = rows.normals.col(i).dot(res.u) + rows.offsets[i];
      if (std::isfinite(rows.offsets[i])) {
        rep.primal_violation = std::max(rep.primal_violation, -s);
        rep.complementarity = std::max(rep.complementarity, std::abs(lam * s));
      }
      if (lam != 0.0) {
        stat -= lam * rows.normals.col(i);
      }
      rep.dual_min = std::min(rep.dual_min, lam);
    }
    rep.stationarity = stat.norm();
  } else {
    Vector combo = Vector::Zero(problem.input_dim());
    double value = 0.0;
    double y_min = 0.0;
    for (Eigen::Index i = 0; i < rows.normals.cols(); ++i) {
      const double y = res.farkas[i];
      if (y != 0.0) {
        combo += y * rows.normals.col(i);
        value += y * rows.offsets[i];
      }
      y_min = std::min(y_min, y);
    }
    rep.farkas_residual = combo.norm();
    rep.farkas_value = value;
    rep.farkas_min = y_min;
  }
  return rep;
}

}  // namespace sdcbf

#endif  // SDCBF_QP_HPP
