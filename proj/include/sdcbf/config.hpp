#ifndef SDCBF_CONFIG_HPP
#define SDCBF_CONFIG_HPP

#include <toml.hpp>

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sdcbf/grid.hpp"
#include "sdcbf/scenario.hpp"

namespace sdcbf {

struct AppConfig {
  ScenarioConfig scenario;
  GridSettings grid;
};

namespace detail {

// Reads keys of one table into typed fields, collecting every problem
// (wrong type, wrong length, unknown key) instead of stopping at the first.
class TableReader {
 public:
  TableReader(const toml::table* t, std::string section, std::vector<std::string>& errors)
      : t_(t), section_(std::move(section)), errors_(errors) {}

  ~TableReader() {
    if (!t_) {
      return;
    }
    for (const auto& [k, v] : *t_) {
      if (!seen_.count(std::string(k.str()))) {
        errors_.push_back(section_ + "." + std::string(k.str()) + ": unknown key");
      }
    }
  }
  TableReader(const TableReader&) = delete;
  TableReader& operator=(const TableReader&) = delete;

  void number(std::string_view key, double& out) {
    const toml::node* n = get(key);
    if (!n) {
      return;
    }
    if (auto v = n->value<double>()) {
      out = *v;
    } else {
      bad(key, "expected a number");
    }
  }
  void integer(std::string_view key, std::int64_t& out) {
    const toml::node* n = get(key);
    if (!n) {
      return;
    }
    if (auto v = n->value_exact<std::int64_t>()) {
      out = *v;
    } else {
      bad(key, "expected an integer");
    }
  }
  void integer(std::string_view key, int& out) {
    std::int64_t v = out;
    integer(key, v);
    out = static_cast<int>(v);
  }
  void count(std::string_view key, std::size_t& out) {
    std::int64_t v = static_cast<std::int64_t>(out);
    integer(key, v);
    if (v < 0) {
      bad(key, "must be >= 0");
      return;
    }
    out = static_cast<std::size_t>(v);
  }
  void unsigned64(std::string_view key, std::uint64_t& out) {
    const toml::node* n = get(key);
    if (!n) {
      return;
    }
    // TOML integers are signed 64-bit; larger seeds go in as strings.
    if (auto v = n->value_exact<std::int64_t>()) {
      if (*v < 0) {
        bad(key, "must be >= 0");
      } else {
        out = static_cast<std::uint64_t>(*v);
      }
    } else if (auto s = n->value_exact<std::string>()) {
      try {
        std::size_t pos = 0;
        out = std::stoull(*s, &pos);
        if (pos != s->size()) {
          bad(key, "not an unsigned integer");
        }
      } catch (const std::exception&) {
        bad(key, "not an unsigned integer");
      }
    } else {
      bad(key, "expected an integer");
    }
  }
  void boolean(std::string_view key, bool& out) {
    const toml::node* n = get(key);
    if (!n) {
      return;
    }
    if (auto v = n->value_exact<bool>()) {
      out = *v;
    } else {
      bad(key, "expected true or false");
    }
  }
  void string(std::string_view key, std::string& out) {
    const toml::node* n = get(key);
    if (!n) {
      return;
    }
    if (auto v = n->value_exact<std::string>()) {
      out = *v;
    } else {
      bad(key, "expected a string");
    }
  }
  // Length -1 accepts any non-empty length.
  void vector(std::string_view key, Vector& out, Eigen::Index length) {
    const toml::node* n = get(key);
    if (!n) {
      return;
    }
    Vector v;
    if (!to_vector(n, v)) {
      bad(key, "expected an array of numbers");
      return;
    }
    if (length >= 0 && v.size() != length) {
      bad(key, "expected " + std::to_string(length) + " entries, got " + std::to_string(v.size()));
      return;
    }
    if (v.size() == 0) {
      bad(key, "must not be empty");
      return;
    }
    out = v;
  }
  void numbers(std::string_view key, std::vector<double>& out) {
    Vector v;
    vector(key, v, -1);
    if (v.size() > 0) {
      out.assign(v.data(), v.data() + v.size());
    }
  }
  // Array of equal-length rows.
  void matrix(std::string_view key, Matrix& out, Eigen::Index cols) {
    const toml::node* n = get(key);
    if (!n) {
      return;
    }
    const toml::array* rows = n->as_array();
    if (!rows || rows->empty()) {
      bad(key, "expected a non-empty array of rows");
      return;
    }
    Matrix m(static_cast<Eigen::Index>(rows->size()), cols);
    for (std::size_t i = 0; i < rows->size(); ++i) {
      Vector r;
      if (!to_vector(rows->get(i), r) || r.size() != cols) {
        bad(key, "row " + std::to_string(i) + " must have " + std::to_string(cols) + " numbers");
        return;
      }
      m.row(static_cast<Eigen::Index>(i)) = r.transpose();
    }
    out = m;
  }

 private:
  const toml::node* get(std::string_view key) {
    seen_.insert(std::string(key));
    return t_ ? t_->get(key) : nullptr;
  }
  void bad(std::string_view key, const std::string& what) {
    errors_.push_back(section_ + "." + std::string(key) + ": " + what);
  }
  static bool to_vector(const toml::node* n, Vector& out) {
    const toml::array* a = n ? n->as_array() : nullptr;
    if (!a) {
      return false;
    }
    out.resize(static_cast<Eigen::Index>(a->size()));
    for (std::size_t i = 0; i < a->size(); ++i) {
      auto v = a->get(i)->value<double>();
      if (!v) {
        return false;
      }
      out[static_cast<Eigen::Index>(i)] = *v;
    }
    return true;
  }

  const toml::table* t_;
  std::string section_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

inline void read_config(const toml::table& root, AppConfig& app,
                        std::vector<std::string>& errors) {
  static const std::set<std::string> sections{"segway",  "scenario",    "desired",
                                              "safety",  "backup",      "synthesis",
                                              "sensitivity", "reach",   "estimation",
                                              "grid"};
  for (const auto& [k, v] : root) {
    const std::string name(k.str());
    if (!sections.count(name)) {
      errors.push_back(name + ": unknown section");
    } else if (!v.is_table()) {
      errors.push_back(name + ": must be a table");
    }
  }
  ScenarioConfig& c = app.scenario;
  {
    TableReader r(root["segway"].as_table(), "segway", errors);
    auto& s = c.segway;
    r.number("M", s.body_mass);
    r.number("m_w", s.wheel_mass);
    r.number("J_w", s.wheel_inertia);
    r.number("J_b", s.body_inertia);
    r.number("L", s.com_height);
    r.number("r", s.wheel_radius);
    r.number("g", s.gravity);
    r.number("k_t", s.torque_constant);
    r.number("u_max", s.input_limit);
  }
  {
    TableReader r(root["scenario"].as_table(), "scenario", errors);
    r.string("name", c.name);
    r.number("frequency", c.frequency);
    r.number("duration", c.duration);
    r.integer("plant_substeps", c.plant_substeps);
    r.number("delay", c.delay);
    std::string variant = to_string(c.variant);
    r.string("variant", variant);
    if (auto v = parse_variant(variant)) {
      c.variant = *v;
    } else {
      errors.push_back("scenario.variant: unknown variant '" + variant +
                       "' (expected unfiltered, nominal, robust, robust+delay-aware)");
    }
    r.boolean("noise", c.noise);
    r.unsigned64("seed", c.seed);
    r.vector("x0", c.x0, 4);
  }
  {
    TableReader r(root["desired"].as_table(), "desired", errors);
    r.vector("gain", c.desired.gain, 4);
    r.vector("reference", c.desired.reference, 4);
  }
  {
    TableReader r(root["safety"].as_table(), "safety", errors);
    r.number("p_max", c.safety.p_max);
    r.number("lambda", c.safety.lambda);
    r.number("horizon", c.safety.horizon);
    r.count("points", c.safety.points);
  }
  {
    TableReader r(root["backup"].as_table(), "backup", errors);
    r.vector("nominal_gain", c.backup.nominal_gain, 4);
    r.number("level_fraction", c.backup.level_fraction);
    r.string("certificate", c.backup.certificate);
  }
  {
    TableReader r(root["synthesis"].as_table(), "synthesis", errors);
    auto& s = c.synthesis;
    r.vector("box_lo", s.box_lo, 4);
    r.vector("box_hi", s.box_hi, 4);
    r.boolean("input_vertices", s.input_vertices);
    r.number("gamma", s.options.gamma);
    r.matrix("state_weight", s.options.state_weight, 4);
    if (s.options.state_weight.size() && s.options.state_weight.rows() != 4) {
      errors.push_back("synthesis.state_weight: expected 4 rows");
    }
    r.numbers("input_weights", s.options.input_weights);
    r.integer("max_iterations", s.options.max_iterations);
  }
  {
    TableReader r(root["sensitivity"].as_table(), "sensitivity", errors);
    auto& s = c.sensitivity;
    r.number("eps_scale", s.eps_scale);
    r.number("det_floor", s.det_floor);
    r.integer("substeps", s.substeps);
    std::string scheme = s.scheme == DifferenceScheme::Central ? "central" : "forward";
    r.string("scheme", scheme);
    if (scheme == "central") {
      s.scheme = DifferenceScheme::Central;
    } else if (scheme == "forward") {
      s.scheme = DifferenceScheme::Forward;
    } else {
      errors.push_back("sensitivity.scheme: expected 'central' or 'forward'");
    }
  }
  {
    TableReader r(root["reach"].as_table(), "reach", errors);
    r.number("inflation", c.reach.inflation);
    r.integer("max_iterations", c.reach.max_iterations);
    r.integer("max_pieces", c.reach.max_pieces);
  }
  {
    TableReader r(root["estimation"].as_table(), "estimation", errors);
    auto& e = c.estimation;
    r.matrix("channels", e.channels, 4);
    r.vector("noise_std", e.noise_std, -1);
    r.vector("process_noise", e.process_noise, 4);
    r.vector("initial_std", e.initial_std, 4);
    r.number("confidence", e.confidence);
    r.vector("caps", e.caps, 4);
  }
  {
    TableReader r(root["grid"].as_table(), "grid", errors);
    r.number("fast_hz", app.grid.fast_hz);
    r.number("slow_hz", app.grid.slow_hz);
    r.number("delay", app.grid.delay);
    r.number("delay_hz", app.grid.delay_hz);
    r.boolean("noise", app.grid.noise);
  }
}

inline std::vector<std::string> validate_grid(const GridSettings& g) {
  std::vector<std::string> e;
  if (!(g.fast_hz > 0.0)) e.push_back("grid.fast_hz must be > 0");
  if (!(g.slow_hz > 0.0)) e.push_back("grid.slow_hz must be > 0");
  if (!(g.delay_hz > 0.0)) e.push_back("grid.delay_hz must be > 0");
  if (!(g.delay >= 0.0)) e.push_back("grid.delay must be >= 0");
  return e;
}

inline AppConfig finish(AppConfig app, std::vector<std::string> errors, const std::string& where) {
  for (auto& e : app.scenario.validate()) {
    errors.push_back(std::move(e));
  }
  for (auto& e : validate_grid(app.grid)) {
    errors.push_back(std::move(e));
  }
  if (!errors.empty()) {
    std::string msg = "invalid configuration " + where + ":";
    for (const auto& e : errors) {
      msg += "\n  - " + e;
    }
    throw ConfigError(msg);
  }
  return app;
}

}  // namespace detail

// Missing keys keep their defaults. Every problem found is listed in the
// thrown ConfigError.
inline AppConfig parse_config(std::string_view text, const std::string& source = "<string>") {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    throw ConfigError("cannot parse " + source + ": " + std::string(e.description()) +
                      " at line " + std::to_string(e.source().begin.line));
  }
  AppConfig app;
  std::vector<std::string> errors;
  detail::read_config(root, app, errors);
  return detail::finish(std::move(app), std::move(errors), "'" + source + "'");
}

inline AppConfig load_config(const std::string& path) {
  toml::table root;
  try {
    root = toml::parse_file(path);
  } catch (const toml::parse_error& e) {
    throw ConfigError("cannot parse " + path + ": " + std::string(e.description()) +
                      " at line " + std::to_string(e.source().begin.line));
  }
  AppConfig app;
  std::vector<std::string> errors;
  detail::read_config(root, app, errors);
  return detail::finish(std::move(app), std::move(errors), "'" + path + "'");
}

}  // namespace sdcbf

#endif  // SDCBF_CONFIG_HPP
