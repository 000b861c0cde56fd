// Command-line front end: simulate, grid, plot, synthesize-gain.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sdcbf/sdcbf.hpp"

namespace fs = std::filesystem;
using namespace sdcbf;

namespace {

AppConfig load_or_default(const std::string& path) {
  return path.empty() ? AppConfig{} : load_config(path);
}

nlohmann::json summary_json(const RunResult& r, const ScenarioConfig& cfg) {
  nlohmann::json j;
  const auto& s = r.summary;
  j["name"] = r.name;
  j["variant"] = to_string(r.variant);
  j["frequency_hz"] = r.frequency;
  j["delay_s"] = r.delay;
  j["delay_steps"] = r.delay_steps;
  j["noise"] = cfg.noise;
  j["seed"] = cfg.seed;
  j["samples"] = r.records.size();
  j["rho"] = r.rho;
  j["backup_level"] = r.epsilon;
  j["min_h"] = s.min_h;
  j["max_abs_p"] = s.max_abs_p;
  j["max_abs_torque"] = s.max_abs_torque;
  j["verdict"] = s.safe ? "SAFE" : "UNSAFE";
  j["fallbacks"] = s.fallbacks;
  j["infeasible"] = s.infeasible;
  j["faults"] = s.faults;
  j["wall_time_s"] = s.wall_time;
  if (!r.error.empty()) {
    j["error"] = r.error;
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw ConfigError("cannot open '" + path.string() + "' for writing");
  }
  os << text;
}

void print_summary(const RunResult& r) {
  const auto& s = r.summary;
  fmt::print("{}: {} (min h {:.6f}, max |p| {:.4f} m, fallbacks {}, infeasible {}, {:.2f} s)\n",
             r.name, s.safe ? "SAFE" : "UNSAFE", s.min_h, s.max_abs_p, s.fallbacks, s.infeasible,
             s.wall_time);
}

int cmd_simulate(const std::string& config, const std::string& out,
                 std::optional<std::uint64_t> seed) {
  AppConfig app = load_or_default(config);
  if (seed) {
    app.scenario.seed = *seed;
  }
  fs::create_directories(out);
  const RunResult r = run_scenario(app.scenario);
  const fs::path dir(out);
  write_csv(r.records, (dir / (r.name + ".csv")).string());
  write_text(dir / (r.name + "_summary.json"), summary_json(r, app.scenario).dump(2) + "\n");
  write_run_plots(PlotRun{r.name, r.records}, app.scenario.safety.p_max, out);
  print_summary(r);
  return r.error.empty() ? 0 : 1;
}

int cmd_grid(const std::string& config, const std::string& out,
             std::optional<std::uint64_t> seed, bool strict) {
  AppConfig app = load_or_default(config);
  if (seed) {
    app.scenario.seed = *seed;
  }
  fs::create_directories(out);
  const fs::path dir(out);
  const auto grid = run_grid(app.scenario, app.grid);
  nlohmann::json rows = nlohmann::json::array();
  std::vector<PlotRun> runs;
  bool all_match = true;
  bool crashed = false;
  for (const auto& o : grid) {
    nlohmann::json j = summary_json(o.result, o.row.config);
    j["name"] = o.row.config.name;
    j["expected"] = o.row.expect_safe ? "SAFE" : "UNSAFE";
    j["match"] = o.matches();
    if (o.crashed) {
      j["verdict"] = "CRASH";
      j["error"] = o.crash_message;
      crashed = true;
    } else {
      write_csv(o.result.records, (dir / (o.row.config.name + ".csv")).string());
      runs.push_back(PlotRun{o.row.config.name, o.result.records});
    }
    all_match = all_match && o.matches();
    rows.push_back(std::move(j));
  }
  const std::string table = verdict_table(grid);
  write_text(dir / "verdicts.txt", table);
  write_text(dir / "grid.json", rows.dump(2) + "\n");
  if (!runs.empty()) {
    write_overlay(runs, app.scenario.safety.p_max, (dir / "grid_overlay.svg").string());
  }
  fmt::print("{}", table);
  if (crashed) {
    return 1;
  }
  return strict && !all_match ? 3 : 0;
}

int cmd_plot(const std::vector<std::string>& files, const std::string& out, double p_max) {
  std::vector<PlotRun> runs;
  for (const auto& f : files) {
    runs.push_back(PlotRun{fs::path(f).stem().string(), read_csv(f)});
  }
  for (const auto& r : runs) {
    for (const auto& p : write_run_plots(r, p_max, out)) {
      fmt::print("{}\n", p);
    }
  }
  if (runs.size() > 1) {
    const auto path = (fs::path(out) / "overlay.svg").string();
    write_overlay(runs, p_max, path);
    fmt::print("{}\n", path);
  }
  return 0;
}

int cmd_synthesize(const std::string& config, const std::string& out) {
  const AppConfig app = load_or_default(config);
  const SegwayModel model(app.scenario.segway);
  ScenarioConfig cfg = app.scenario;
  cfg.backup.certificate.clear();  // always synthesize here
  const BackupDesign d = design_backup(model, cfg);
  const auto parent = fs::path(out).parent_path();
  if (!parent.empty()) {
    fs::create_directories(parent);
  }
  save_certificate(d.certificate, out);
  fmt::print("K = [{}]\nrho = {:.6g}, backup level = {:.6g}, worst margin = {:.3e}\n",
             fmt::join(std::vector<double>(d.certificate.K.data(),
                                           d.certificate.K.data() + d.certificate.K.size()),
                       ", "),
             d.rho, d.epsilon,
             *std::max_element(d.certificate.margins.begin(), d.certificate.margins.end()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampled-data backup-controller CBF safety filter on a Segway"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  std::string log_level = "warn";
  app.add_option("--seed", seed, "RNG seed override");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::string sim_config;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "Run one scenario; writes CSV, summary and plots");
  sim->add_option("--config", sim_config, "TOML config")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--seed", seed, "RNG seed override");

  std::string grid_config;
  std::string grid_out;
  bool strict = false;
  auto* grid = app.add_subcommand("grid", "Run the five-row verdict grid");
  grid->add_option("--config", grid_config, "TOML config (defaults if omitted)")
      ->check(CLI::ExistingFile);
  grid->add_option("--out", grid_out, "Output directory")->required();
  grid->add_option("--seed", seed, "RNG seed override");
  grid->add_flag("--strict", strict, "Exit with 3 if any verdict differs from the expectation");

  std::vector<std::string> plot_runs;
  std::string plot_out;
  double p_max = 0.5;
  auto* plot = app.add_subcommand("plot", "SVG plots from run CSV files");
  plot->add_option("--runs", plot_runs, "Run CSV files")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "Output directory")->required();
  plot->add_option("--p-max", p_max, "Corridor half-width drawn on position plots");

  std::string syn_config;
  std::string syn_out;
  auto* syn = app.add_subcommand("synthesize-gain", "Synthesize the pre-feedback gain certificate");
  syn->add_option("--config", syn_config, "TOML config")->required()->check(CLI::ExistingFile);
  syn->add_option("--out", syn_out, "Certificate JSON path")->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*sim) {
      return cmd_simulate(sim_config, sim_out, seed);
    }
    if (*grid) {
      return cmd_grid(grid_config, grid_out, seed, strict);
    }
    if (*plot) {
      return cmd_plot(plot_runs, plot_out, p_max);
    }
    if (*syn) {
      return cmd_synthesize(syn_config, syn_out);
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
