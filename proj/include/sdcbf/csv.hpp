#ifndef SDCBF_CSV_HPP
#define SDCBF_CSV_HPP

#include <fmt/format.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sdcbf/scenario.hpp"

namespace sdcbf {

// One row per controller sample. Columns, in order:
//   t                                  s
//   p, pdot, theta, thetadot           true state at t
//   est_p .. est_thetadot              estimate at t
//   dx_p .. dx_thetadot                uncertainty box radii
//   pred_p .. pred_thetadot            state the constraints were built at
//   u_des, u_cmd, u_applied, torque    command units
//   h, h_min                           corridor value at t and min over [t, t+dt]
//   min_margin                         min constraint value at the output (nan if none)
//   fallback                           0/1
//   qp_status                          0 none, 1 optimal, 2 infeasible, 3 outside, 4 fault
//   num_constraints
inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "t",         "p",        "pdot",      "theta",       "thetadot",  "est_p",
      "est_pdot",  "est_theta", "est_thetadot", "dx_p",     "dx_pdot",   "dx_theta",
      "dx_thetadot", "pred_p",  "pred_pdot", "pred_theta", "pred_thetadot", "u_des",
      "u_cmd",     "u_applied", "torque",    "h",           "h_min",     "min_margin",
      "fallback",  "qp_status", "num_constraints"};
  return cols;
}

namespace detail {

// Shortest decimal at 17 significant digits reads back to the same double.
inline std::string fmt17(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  return fmt::format("{:.17g}", v);
}

inline double parse_double(const std::string& s) {
  if (s == "nan") {
    return std::numeric_limits<double>::quiet_NaN();
  }
  if (s == "inf") {
    return std::numeric_limits<double>::infinity();
  }
  if (s == "-inf") {
    return -std::numeric_limits<double>::infinity();
  }
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) {
    throw ConfigError("csv: bad number '" + s + "'");
  }
  return v;
}

inline Vector or_nan(const Vector& v) {
  return v.size() == 4 ? v : Vector::Constant(4, std::numeric_limits<double>::quiet_NaN());
}

}  // namespace detail

inline std::string csv_string(const std::vector<SampleRecord>& records) {
  std::string out;
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out += cols[i];
    out += i + 1 < cols.size() ? ',' : '\n';
  }
  for (const auto& r : records) {
    std::vector<std::string> f;
    f.reserve(cols.size());
    f.push_back(detail::fmt17(r.t));
    for (const Vector* v : {&r.x, &r.x_est, &r.dx_radius, &r.x_pred}) {
      const Vector w = detail::or_nan(*v);
      for (Eigen::Index i = 0; i < 4; ++i) {
        f.push_back(detail::fmt17(w[i]));
      }
    }
    for (double v : {r.u_des, r.u_cmd, r.u_applied, r.torque, r.h, r.h_min, r.min_margin}) {
      f.push_back(detail::fmt17(v));
    }
    f.push_back(r.fallback ? "1" : "0");
    f.push_back(std::to_string(static_cast<int>(r.qp)));
    f.push_back(std::to_string(r.num_constraints));
    for (std::size_t i = 0; i < f.size(); ++i) {
      out += f[i];
      out += i + 1 < f.size() ? ',' : '\n';
    }
  }
  return out;
}

inline void write_csv(const std::vector<SampleRecord>& records, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw ConfigError("cannot open '" + path + "' for writing");
  }
  os << csv_string(records);
  if (!os) {
    throw ConfigError("write to '" + path + "' failed");
  }
}

inline std::vector<SampleRecord> parse_csv(const std::string& text,
                                           const std::string& source = "<csv>") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw ConfigError(source + ": empty file");
  }
  const auto& cols = csv_columns();
  std::string expected;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    expected += cols[i] + (i + 1 < cols.size() ? "," : "");
  }
  if (line != expected) {
    throw ConfigError(source + ": unexpected header");
  }
  std::vector<SampleRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      f.push_back(cell);
    }
    if (f.size() != cols.size()) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(cols.size()) + " fields");
    }
    try {
      SampleRecord r;
      std::size_t k = 0;
      r.t = detail::parse_double(f[k++]);
      for (Vector* v : {&r.x, &r.x_est, &r.dx_radius, &r.x_pred}) {
        v->resize(4);
        for (Eigen::Index i = 0; i < 4; ++i) {
          (*v)[i] = detail::parse_double(f[k++]);
        }
      }
      for (double* v : {&r.u_des, &r.u_cmd, &r.u_applied, &r.torque, &r.h, &r.h_min,
                        &r.min_margin}) {
        *v = detail::parse_double(f[k++]);
      }
      r.fallback = f[k++] == "1";
      r.qp = static_cast<QpCode>(std::stoi(f[k++]));
      r.num_constraints = std::stoi(f[k++]);
      out.push_back(std::move(r));
    } catch (const std::invalid_argument&) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return out;
}

inline std::vector<SampleRecord> read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw ConfigError("cannot open '" + path + "'");
  }
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_csv(ss.str(), path);
}

// 64-bit FNV-1a, for pinning file contents.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sdcbf

#endif  // SDCBF_CSV_HPP
