#ifndef SDCBF_GRID_HPP
#define SDCBF_GRID_HPP

#include <fmt/format.h>

#include <future>
#include <string>
#include <vector>

#include "sdcbf/scenario.hpp"

namespace sdcbf {

struct GridSettings {
  double fast_hz = 40.0;
  double slow_hz = 20.0;
  double delay = 0.03;      // s
  double delay_hz = 100.0;  // controller rate for the delay pair
  bool noise = false;
};

// Expected verdict per row; the grid reports whether each row matched.
struct GridRow {
  ScenarioConfig config;
  bool expect_safe = true;
};

// nominal@fast, nominal@slow, robust@slow, nominal with delay (unaware),
// robust delay-aware with the same delay.
inline std::vector<GridRow> grid_rows(const ScenarioConfig& base, const GridSettings& g) {
  auto row = [&](std::string name, Variant v, double hz, double delay, bool safe) {
    GridRow r;
    r.config = base;
    r.config.name = std::move(name);
    r.config.variant = v;
    r.config.frequency = hz;
    r.config.delay = delay;
    r.config.noise = g.noise;
    r.expect_safe = safe;
    return r;
  };
  const auto hz = [](double f) { return fmt::format("{:g}hz", f); };
  const auto ms = fmt::format("{:g}ms", g.delay * 1e3);
  return {
      row("nominal_" + hz(g.fast_hz), Variant::Nominal, g.fast_hz, 0.0, true),
      row("nominal_" + hz(g.slow_hz), Variant::Nominal, g.slow_hz, 0.0, false),
      row("robust_" + hz(g.slow_hz), Variant::Robust, g.slow_hz, 0.0, true),
      row("nominal_delay_" + ms + "_" + hz(g.delay_hz), Variant::Nominal, g.delay_hz, g.delay,
          false),
      row("delay_aware_" + ms + "_" + hz(g.delay_hz), Variant::RobustDelayAware, g.delay_hz,
          g.delay, true),
  };
}

struct GridOutcome {
  GridRow row;
  RunResult result;
  bool crashed = false;
  std::string crash_message;

  bool matches() const { return !crashed && result.summary.safe == row.expect_safe; }
};

// Rows are independent and run concurrently; a crashing row is recorded and
// the others still complete. The backup design is shared (same plant and
// settings across rows).
inline std::vector<GridOutcome> run_grid(const ScenarioConfig& base, const GridSettings& g) {
  const SegwayModel model(base.segway);
  const BackupDesign design = design_backup(model, base);
  std::vector<GridRow> rows = grid_rows(base, g);
  std::vector<std::future<RunResult>> futures;
  futures.reserve(rows.size());
  for (const auto& r : rows) {
    futures.push_back(std::async(std::launch::async, [cfg = r.config, &design]() {
      return run_scenario(cfg, &design);
    }));
  }
  std::vector<GridOutcome> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    GridOutcome o;
    o.row = rows[i];
    try {
      o.result = futures[i].get();
      if (!o.result.error.empty()) {
        o.crashed = true;
        o.crash_message = o.result.error;
      }
    } catch (const std::exception& e) {
      o.crashed = true;
      o.crash_message = e.what();
    }
    out.push_back(std::move(o));
  }
  return out;
}

inline std::string verdict_table(const std::vector<GridOutcome>& grid) {
  std::string s = fmt::format("{:<28} {:<20} {:>7} {:>9} {:>10} {:>10} {:>8} {:>8} {}\n", "run",
                              "variant", "hz", "delay_ms", "min_h", "max|p|", "verdict", "expect",
                              "match");
  for (const auto& o : grid) {
    const auto& c = o.row.config;
    const char* verdict = o.crashed ? "CRASH" : (o.result.summary.safe ? "SAFE" : "UNSAFE");
    s += fmt::format("{:<28} {:<20} {:>7g} {:>9g} {:>10.5f} {:>10.5f} {:>8} {:>8} {}\n", c.name,
                     to_string(c.variant), c.frequency, c.delay * 1e3, o.result.summary.min_h,
                     o.result.summary.max_abs_p, verdict, o.row.expect_safe ? "SAFE" : "UNSAFE",
                     o.matches() ? "yes" : "NO");
  }
  return s;
}

}  // namespace sdcbf

#endif  // SDCBF_GRID_HPP
