#ifndef SDCBF_SCENARIO_HPP
#define SDCBF_SCENARIO_HPP

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sdcbf/barrier.hpp"
#include "sdcbf/estimation.hpp"
#include "sdcbf/safety_filter.hpp"
#include "sdcbf/segway.hpp"
#include "sdcbf/synthesis.hpp"

namespace sdcbf {

enum class Variant { Unfiltered, Nominal, Robust, RobustDelayAware };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::Unfiltered: return "unfiltered";
    case Variant::Nominal: return "nominal";
    case Variant::Robust: return "robust";
    case Variant::RobustDelayAware: return "robust+delay-aware";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(const std::string& s) {
  for (Variant v : {Variant::Unfiltered, Variant::Nominal, Variant::Robust,
                    Variant::RobustDelayAware}) {
    if (s == to_string(v)) {
      return v;
    }
  }
  if (s == "delay-aware") {
    return Variant::RobustDelayAware;
  }
  return std::nullopt;
}

// Desired controller: saturated full-state tracking of a reference that
// lies outside the safe corridor.
struct DesiredSettings {
  Vector gain = (Vector(4) << 14.0, 21.0, 140.0, 25.0).finished();
  Vector reference = (Vector(4) << 0.8, 0.0, 0.0, 0.0).finished();
};

struct SafetySettings {
  double p_max = 0.5;
  double lambda = 14.0;
  double horizon = 2.0;
  std::size_t points = 10;
};

struct SynthesisSettings {
  // Operating box the vertex family is taken over (p and pdot do not enter
  // the dynamics, so their bounds are usually zero-width).
  Vector box_lo = (Vector(4) << 0.0, 0.0, -0.3, -1.0).finished();
  Vector box_hi = (Vector(4) << 0.0, 0.0, 0.3, 1.0).finished();
  // Also linearize at u = +-u_max, so the certificate covers the
  // state-dependent input gain.
  bool input_vertices = true;
  // A single LQR input weight: the wider default sweep favors the most
  // available gain, which converges to the backup set too slowly.
  SynthesisOptions options = [] {
    SynthesisOptions o;
    o.input_weights = {0.1};
    return o;
  }();
};

struct BackupSettings {
  Vector nominal_gain = Vector::Zero(4);
  // Backup set level as a fraction of the largest admissible level.
  double level_fraction = 0.9;
  std::string certificate;  // load instead of synthesizing when non-empty
};

struct EstimationSettings {
  Matrix channels = SensorModel::segway_channels();
  Vector noise_std = (Vector(3) << 0.002, 0.002, 0.005).finished();
  // Process noise spectral density per state (Q_d = diag(q) h per step).
  // The simulated plant has no process disturbance, so Q is small; looser
  // values inflate the unmeasured pdot radius until the robust rows are
  // infeasible everywhere.
  Vector process_noise = (Vector(4) << 1e-10, 1e-8, 1e-10, 1e-8).finished();
  Vector initial_std = (Vector(4) << 0.005, 0.01, 0.005, 0.01).finished();
  double confidence = 3.0;
  Vector caps = (Vector(4) << 0.05, 0.1, 0.05, 0.2).finished();
};

struct ScenarioConfig {
  std::string name = "scenario";
  SegwayParams segway;
  double frequency = 40.0;  // Hz
  double duration = 20.0;   // s
  int plant_substeps = 10;  // plant RK4 steps per controller period
  double delay = 0.0;       // s, input transport delay
  Variant variant = Variant::Nominal;
  bool noise = false;
  std::uint64_t seed = 1;
  Vector x0 = Vector::Zero(4);
  DesiredSettings desired;
  SafetySettings safety;
  BackupSettings backup;
  SynthesisSettings synthesis;
  SensitivityOptions sensitivity;
  ReachOptions reach;
  EstimationSettings estimation;

  double dt() const { return 1.0 / frequency; }

  std::vector<std::string> validate() const {
    std::vector<std::string> e;
    auto need = [&](bool ok, const std::string& msg) {
      if (!ok) {
        e.push_back(msg);
      }
    };
    need(frequency > 0.0 && std::isfinite(frequency), "scenario.frequency must be > 0");
    need(duration > 0.0 && std::isfinite(duration), "scenario.duration must be > 0");
    need(plant_substeps >= 10, "scenario.plant_substeps must be >= 10");
    need(delay >= 0.0 && std::isfinite(delay), "scenario.delay must be >= 0");
    need(x0.size() == 4, "scenario.x0 must have 4 entries");
    need(desired.gain.size() == 4, "desired.gain must have 4 entries");
    need(desired.reference.size() == 4, "desired.reference must have 4 entries");
    need(safety.p_max > 0.0, "safety.p_max must be > 0");
    need(safety.lambda > 0.0, "safety.lambda must be > 0");
    need(safety.horizon > 0.0, "safety.horizon must be > 0");
    need(safety.points >= 1, "safety.points must be >= 1");
    need(backup.nominal_gain.size() == 4, "backup.nominal_gain must have 4 entries");
    need(backup.level_fraction > 0.0 && backup.level_fraction <= 1.0,
         "backup.level_fraction must be in (0, 1]");
    need(synthesis.box_lo.size() == 4 && synthesis.box_hi.size() == 4,
         "synthesis.box_lo/box_hi must have 4 entries");
    if (synthesis.box_lo.size() == 4 && synthesis.box_hi.size() == 4) {
      need((synthesis.box_lo.array() <= synthesis.box_hi.array()).all(),
           "synthesis.box_lo must be <= synthesis.box_hi");
    }
    need(synthesis.options.gamma >= 0.0, "synthesis.gamma must be >= 0");
    need(!synthesis.options.input_weights.empty(), "synthesis.input_weights must be non-empty");
    need(sensitivity.eps_scale > 0.0, "sensitivity.eps_scale must be > 0");
    need(sensitivity.substeps >= 1, "sensitivity.substeps must be >= 1");
    need(reach.inflation > 1.0, "reach.inflation must be > 1");
    need(reach.max_iterations >= 1, "reach.max_iterations must be >= 1");
    need(segway.input_limit > 0.0, "segway.u_max must be > 0");
    need(segway.wheel_radius > 0.0, "segway.r must be > 0");
    need(segway.body_mass > 0.0, "segway.M must be > 0");
    const auto& es = estimation;
    need(es.channels.cols() == 4, "estimation.channels rows must have 4 entries");
    need(es.noise_std.size() == es.channels.rows(),
         "estimation.noise_std must have one entry per channel");
    need((es.noise_std.array() >= 0.0).all(), "estimation.noise_std must be >= 0");
    need(es.process_noise.size() == 4 && (es.process_noise.array() >= 0.0).all(),
         "estimation.process_noise must have 4 entries >= 0");
    need(es.initial_std.size() == 4 && (es.initial_std.array() >= 0.0).all(),
         "estimation.initial_std must have 4 entries >= 0");
    need(es.confidence > 0.0, "estimation.confidence must be > 0");
    need(es.caps.size() == 4 && (es.caps.array() >= 0.0).all(),
         "estimation.caps must have 4 entries >= 0");
    if (frequency > 0.0 && safety.horizon > 0.0) {
      const double r = safety.horizon * frequency;
      need(std::abs(r - std::round(r)) < 1e-9 * std::max(1.0, r),
           "safety.horizon must be a multiple of the controller period");
    }
    if (frequency > 0.0 && plant_substeps >= 1 && delay >= 0.0) {
      const double r = delay * frequency * plant_substeps;
      need(std::abs(r - std::round(r)) < 1e-6,
           "scenario.delay must be a multiple of the plant substep");
    }
    return e;
  }
};

// Everything the filter needs that is derived once at startup.
struct BackupDesign {
  GainCertificate certificate;
  Matrix total_gain;        // nominal + pre-feedback
  double rho = 0.0;         // availability radius of the total gain
  double level_cap = 0.0;   // largest level whose ellipsoid fits the boxes
  double epsilon = 0.0;     // backup-set level
  SafetySpec spec;
  BackupController backup;
};

// Largest level l with {x' P x <= l} inside |x_i| <= w_i on each axis where
// w_i is finite.
inline double ellipsoid_level_cap(const Matrix& P, const Vector& half_widths) {
  const Matrix Pinv = P.inverse();
  double cap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < half_widths.size(); ++i) {
    if (std::isfinite(half_widths[i])) {
      cap = std::min(cap, half_widths[i] * half_widths[i] / Pinv(i, i));
    }
  }
  return cap;
}

inline VertexFamily segway_vertex_family(const SegwayModel& model, const ScenarioConfig& cfg) {
  const Box inputs = cfg.synthesis.input_vertices ? Box::symmetric(model.input_bound())
                                                  : Box::point(Vector::Zero(1));
  VertexFamily fam =
      linearize_at_vertices(model, Box(cfg.synthesis.box_lo, cfg.synthesis.box_hi), inputs);
  const Matrix G = cfg.backup.nominal_gain.transpose();
  for (std::size_t i = 0; i < fam.size(); ++i) {
    fam.A[i] += fam.B[i] * G;  // the nominal gain is part of the loop being certified
  }
  return fam;
}

inline BackupDesign design_backup(const SegwayModel& model, const ScenarioConfig& cfg,
                                  const GainCertificate* given = nullptr) {
  BackupDesign d;
  if (given) {
    d.certificate = *given;
  } else if (!cfg.backup.certificate.empty()) {
    d.certificate = load_certificate(cfg.backup.certificate);
  } else {
    d.certificate = synthesize_gain(segway_vertex_family(model, cfg), model.input_bound(),
                                    cfg.synthesis.options);
  }
  const Matrix G = cfg.backup.nominal_gain.transpose();
  require_same_dim(d.certificate.K.cols(), 4, "gain certificate K");
  d.total_gain = G + d.certificate.K;
  d.rho = availability_radius(d.total_gain, d.certificate.P, model.input_bound());

  constexpr double inf = std::numeric_limits<double>::infinity();
  Vector widths = Vector::Constant(4, inf);
  widths[0] = cfg.safety.p_max;
  for (Eigen::Index i = 0; i < 4; ++i) {
    if (cfg.synthesis.box_lo[i] < cfg.synthesis.box_hi[i]) {
      widths[i] = std::min(widths[i], std::min(-cfg.synthesis.box_lo[i], cfg.synthesis.box_hi[i]));
    }
  }
  d.level_cap = ellipsoid_level_cap(d.certificate.P, widths);
  d.epsilon = cfg.backup.level_fraction * std::min(d.rho * d.rho, d.level_cap);
  if (!(d.epsilon > 0.0) || !std::isfinite(d.epsilon)) {
    throw SynthesisError("design_backup: backup-set level is not positive and finite");
  }
  d.spec.safe = QuadraticBarrier::corridor(4, 0, cfg.safety.p_max);
  d.spec.backup_set = QuadraticBarrier::ellipsoid(d.certificate.P, d.epsilon, Vector::Zero(4));
  d.spec.horizon = cfg.safety.horizon;
  d.spec.lambda = cfg.safety.lambda;
  d.spec.points = cfg.safety.points;
  d.backup = BackupController(G, d.certificate.K, Vector::Zero(4), model.input_bound());
  return d;
}

using Plant = PrefeedbackModel<SegwayModel>;

enum class QpCode { None = 0, Optimal = 1, Infeasible = 2, Outside = 3, Fault = 4 };

// One controller sample.
struct SampleRecord {
  double t = 0.0;
  Vector x;          // true state at t
  Vector x_est;      // estimate at t
  Vector dx_radius;  // uncertainty box radii
  Vector x_pred;     // state the constraints were built at
  double u_des = 0.0;
  double u_cmd = 0.0;      // filter output issued at t
  double u_applied = 0.0;  // input reaching the plant at t
  double torque = 0.0;     // u_applied + K x(t), total actuator demand
  double h = 0.0;          // h(x(t))
  double h_min = 0.0;      // min h over [t, t + dt] on the plant substeps
  double min_margin = 0.0; // min constraint value at the output (NaN if none)
  bool fallback = false;
  QpCode qp = QpCode::None;
  int num_constraints = 0;
};

struct RunSummary {
  double min_h = std::numeric_limits<double>::infinity();
  double max_abs_p = 0.0;
  double max_abs_torque = 0.0;
  bool safe = true;
  std::size_t fallbacks = 0;
  std::size_t infeasible = 0;
  std::size_t faults = 0;
  double wall_time = 0.0;  // s
};

struct RunResult {
  std::string name;
  Variant variant = Variant::Nominal;
  double frequency = 0.0;
  double delay = 0.0;
  std::size_t delay_steps = 0;
  double rho = 0.0;
  double epsilon = 0.0;
  std::vector<SampleRecord> records;
  RunSummary summary;
  // Zero-input startup check for the delay-aware variant (true otherwise).
  bool startup_ok = true;
  std::string error;  // set when the run had to stop early
};

inline RunSummary summarize(const std::vector<SampleRecord>& records) {
  RunSummary s;
  for (const auto& r : records) {
    s.min_h = std::min(s.min_h, r.h_min);
    s.fallbacks += r.fallback ? 1 : 0;
    s.infeasible += r.qp == QpCode::Infeasible ? 1 : 0;
    s.faults += r.qp == QpCode::Fault ? 1 : 0;
  }
  s.safe = s.min_h >= 0.0;
  return s;
}

// |p| implied by a corridor value h = 1 - (p / p_max)^2.
inline double corridor_excursion(double h, double p_max) {
  return p_max * std::sqrt(std::max(0.0, 1.0 - h));
}

namespace detail {

// The tracking law asks for a total torque; the pre-feedback already supplies
// K x of it.
inline double desired_input(const DesiredSettings& d, const Matrix& K, const Vector& x,
                            double u_max) {
  const double u = d.gain.dot(x - d.reference) - K.row(0).dot(x);
  return std::clamp(u, -u_max, u_max);
}

}  // namespace detail

// Closed loop: plant integrated at plant_substeps per controller period with
// the input held; the controller samples at t_k = k dt on measurements taken
// at t_k only. Commands reach the plant after `delay` seconds (zero before
// the first one arrives). Deterministic in the seed.
inline RunResult run_scenario(const ScenarioConfig& cfg, const BackupDesign* design = nullptr) {
  const auto errs = cfg.validate();
  if (!errs.empty()) {
    std::string msg = "invalid scenario '" + cfg.name + "':";
    for (const auto& e : errs) {
      msg += "\n  - " + e;
    }
    throw ConfigError(msg);
  }
  const auto start = std::chrono::steady_clock::now();
  const SegwayModel segway(cfg.segway);
  const BackupDesign own = design ? BackupDesign{} : design_backup(segway, cfg);
  const BackupDesign& bd = design ? *design : own;
  // The pre-feedback is part of the plant; the controller drives its input.
  const Plant model(segway, bd.certificate.K);

  const double dt = cfg.dt();
  const int S = cfg.plant_substeps;
  const double h = dt / S;
  const auto steps = static_cast<std::size_t>(std::llround(cfg.duration * cfg.frequency));
  const auto delay_substeps = static_cast<std::size_t>(std::llround(cfg.delay / h));
  const double u_max = model.input_bound()[0];

  FilterOptions fopts;
  fopts.dt = dt;
  fopts.robustness = cfg.variant == Variant::Nominal ? Robustness::Nominal : Robustness::Robust;
  fopts.sensitivity = cfg.sensitivity;
  fopts.reach = cfg.reach;
  SafetyFilter<Plant> filter(model, bd.spec, bd.backup, fopts);

  const DelaySplit split = split_delay(cfg.delay, dt);
  std::optional<DelayedSafetyFilter<Plant>> delayed;
  if (cfg.variant == Variant::RobustDelayAware) {
    delayed.emplace(filter, split.steps, S);
  }

  RunResult res;
  res.name = cfg.name;
  res.variant = cfg.variant;
  res.frequency = cfg.frequency;
  res.delay = cfg.delay;
  res.delay_steps = split.steps;
  res.rho = bd.rho;
  res.epsilon = bd.epsilon;

  if (delayed) {
    // The first n periods run on the zero inputs already in the line; every
    // start state the estimate admits must survive them.
    Box start = Box::point(cfg.x0);
    if (cfg.noise) {
      start = around(cfg.x0, Box::symmetric(cfg.estimation.confidence * cfg.estimation.initial_std));
    }
    const StartupCheck check =
        check_zero_input_startup(filter, start, split.steps, 100, cfg.seed, S);
    res.startup_ok = check.passed;
    if (!check.passed) {
      spdlog::warn("{}: zero-input startup check failed (worst margin {:.3e})", cfg.name,
                   check.worst_margin);
    }
  }

  // Estimator.
  SensorModel sensor(cfg.estimation.channels, cfg.estimation.noise_std, cfg.seed);
  EkfState est;
  est.mean = cfg.x0;
  est.cov = cfg.estimation.initial_std.array().square().matrix().asDiagonal();
  const Matrix Qd = Matrix(cfg.estimation.process_noise.asDiagonal()) * h;
  SensitivityOptions ekf_opts = cfg.sensitivity;
  ekf_opts.substeps = 1;

  // Commands in flight, one slot per plant substep.
  std::deque<double> line(delay_substeps, 0.0);

  Vector x = cfg.x0;
  const Vector u_zero = Vector::Zero(1);
  for (std::size_t k = 0; k <= steps; ++k) {
    SampleRecord r;
    r.t = static_cast<double>(k) * dt;
    r.x = x;
    r.h = bd.spec.safe(x);

    // Measurement and estimate at t_k.
    Vector x_hat = x;
    Box delta = Box::point(Vector::Zero(4));
    if (cfg.noise) {
      try {
        est = ekf_update(est, sensor.measure(x), cfg.estimation.channels,
                         cfg.estimation.noise_std);
      } catch (const Error& e) {
        spdlog::warn("{}: estimator update failed at t={:.3f}: {}", cfg.name, r.t, e.what());
      }
      x_hat = est.mean;
      delta = uncertainty_box(est, cfg.estimation.confidence, cfg.estimation.caps);
    }
    r.x_est = x_hat;
    r.dx_radius = delta.radius();
    r.x_pred = x_hat;
    r.u_des = detail::desired_input(cfg.desired, bd.certificate.K, x_hat, u_max);
    const Vector u_des = Vector::Constant(1, r.u_des);

    FilterDiagnostics diag;
    Vector u_cmd = u_des;
    switch (cfg.variant) {
      case Variant::Unfiltered:
        break;
      case Variant::Nominal:
      case Variant::Robust: {
        FilterOutput out = filter.filter_step(x_hat, delta, u_des);
        u_cmd = out.u;
        diag = std::move(out.diag);
        break;
      }
      case Variant::RobustDelayAware: {
        Box pred_delta = delta;
        if (cfg.noise) {
          // Push the estimate's covariance through the buffered inputs.
          EkfState p = est;
          SensitivityOptions po = cfg.sensitivity;
          po.substeps = S;
          for (const Vector& ub : delayed->buffer().entries()) {
            p = ekf_predict(model, p, ub, dt, Qd * S, po);
          }
          pred_delta = uncertainty_box(p, cfg.estimation.confidence, cfg.estimation.caps);
        }
        Box margin = Box::point(Vector::Zero(4));
        if (split.residual > 0.0) {
          // The input starts acting up to `residual` earlier than predicted.
          const Vector xp = delayed->predict(x_hat);
          const Box reach = reachable_box(model, xp, split.residual, cfg.reach);
          margin = Box(reach.lo() - xp, reach.hi() - xp);
        }
        DelayedOutput out = delayed->delayed_filter_step(x_hat, pred_delta, u_des, margin);
        u_cmd = out.u;
        r.x_pred = out.x_predicted;
        diag = std::move(out.diag);
        break;
      }
    }
    r.u_cmd = u_cmd[0];
    if (cfg.variant != Variant::Unfiltered) {
      r.fallback = diag.fallback;
      r.num_constraints = static_cast<int>(diag.num_constraints);
      if (diag.fault) {
        r.qp = QpCode::Fault;
      } else if (!diag.inside) {
        r.qp = QpCode::Outside;
      } else if (diag.infeasible) {
        r.qp = QpCode::Infeasible;
      } else {
        r.qp = QpCode::Optimal;
      }
      r.min_margin = diag.fallback || diag.constraints.empty()
                         ? std::numeric_limits<double>::quiet_NaN()
                         : diag.min_constraint_margin;
    } else {
      r.min_margin = std::numeric_limits<double>::quiet_NaN();
    }

    // Plant over [t_k, t_k + dt].
    r.u_applied = delay_substeps == 0 ? r.u_cmd : line.front();
    r.torque = r.u_applied + bd.certificate.K.row(0).dot(x);
    r.h_min = r.h;
    if (k < steps) {
      try {
        for (int s = 0; s < S; ++s) {
          double ua = r.u_cmd;
          if (delay_substeps > 0) {
            line.push_back(r.u_cmd);
            ua = line.front();
            line.pop_front();
          }
          const Vector u_applied = Vector::Constant(1, ua);
          if (cfg.noise) {
            est = ekf_predict(model, est, u_applied, h, Qd, ekf_opts);
          }
          x = step_zoh(model, x, u_applied, h);
          r.h_min = std::min(r.h_min, bd.spec.safe(x));
        }
      } catch (const Error& e) {
        res.error = std::string("plant integration failed at t=") + std::to_string(r.t) + ": " +
                    e.what();
        spdlog::error("{}: {}", cfg.name, res.error);
        res.records.push_back(std::move(r));
        break;
      }
    }
    res.records.push_back(std::move(r));
  }

  res.summary = summarize(res.records);
  for (const auto& r : res.records) {
    res.summary.max_abs_p = std::max(res.summary.max_abs_p, std::abs(r.x[0]));
    res.summary.max_abs_torque = std::max(res.summary.max_abs_torque, std::abs(r.torque));
  }
  // Peak excursion between samples, from the substep minimum of h.
  res.summary.max_abs_p = std::max(res.summary.max_abs_p,
                                   corridor_excursion(res.summary.min_h, cfg.safety.p_max));
  res.summary.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace sdcbf

#endif  // SDCBF_SCENARIO_HPP
