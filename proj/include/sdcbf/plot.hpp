#ifndef SDCBF_PLOT_HPP
#define SDCBF_PLOT_HPP

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "sdcbf/scenario.hpp"

namespace sdcbf {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct PlotPanel {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<PlotSeries> series;
  std::vector<double> hlines;  // drawn dashed red (limits)
};

// Minimal SVG line plots: panels stacked vertically, shared width.
class SvgFigure {
 public:
  explicit SvgFigure(double width = 800.0, double panel_height = 260.0)
      : width_(width), panel_h_(panel_height) {}

  void add(PlotPanel p) { panels_.push_back(std::move(p)); }

  std::string render() const {
    const double H = panel_h_ * static_cast<double>(std::max<std::size_t>(1, panels_.size()));
    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:g}\" height=\"{:g}\" "
        "viewBox=\"0 0 {:g} {:g}\" font-family=\"sans-serif\" font-size=\"11\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        width_, H, width_, H);
    for (std::size_t i = 0; i < panels_.size(); ++i) {
      s += render_panel(panels_[i], static_cast<double>(i) * panel_h_);
    }
    s += "</svg>\n";
    return s;
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
      throw ConfigError("cannot open '" + path + "' for writing");
    }
    os << render();
    if (!os) {
      throw ConfigError("write to '" + path + "' failed");
    }
  }

 private:
  static std::string escape(const std::string& in) {
    std::string out;
    for (char c : in) {
      switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
      }
    }
    return out;
  }

  // Tick step from {1, 2, 5} x 10^k giving about n ticks.
  static double nice_step(double span, int n) {
    const double raw = span / std::max(1, n);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / mag;
    return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
  }

  std::string render_panel(const PlotPanel& p, double top) const {
    constexpr double ml = 70, mr = 150, mt = 28, mb = 40;
    const double x0 = ml;
    const double x1 = width_ - mr;
    const double y0 = top + mt;
    const double y1 = top + panel_h_ - mb;

    double xmin = std::numeric_limits<double>::infinity();
    double xmax = -xmin;
    double ymin = xmin;
    double ymax = -xmin;
    for (const auto& se : p.series) {
      for (std::size_t i = 0; i < se.x.size() && i < se.y.size(); ++i) {
        if (std::isfinite(se.x[i]) && std::isfinite(se.y[i])) {
          xmin = std::min(xmin, se.x[i]);
          xmax = std::max(xmax, se.x[i]);
          ymin = std::min(ymin, se.y[i]);
          ymax = std::max(ymax, se.y[i]);
        }
      }
    }
    for (double h : p.hlines) {
      ymin = std::min(ymin, h);
      ymax = std::max(ymax, h);
    }
    if (!std::isfinite(xmin)) {
      xmin = 0;
      xmax = 1;
    }
    if (!std::isfinite(ymin)) {
      ymin = -1;
      ymax = 1;
    }
    if (xmax <= xmin) {
      xmax = xmin + 1;
    }
    if (ymax <= ymin) {
      ymin -= 0.5;
      ymax += 0.5;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto X = [&](double v) { return x0 + (v - xmin) / (xmax - xmin) * (x1 - x0); };
    auto Y = [&](double v) { return y1 - (v - ymin) / (ymax - ymin) * (y1 - y0); };

    std::string s = fmt::format("<g class=\"panel\">\n<text x=\"{:.1f}\" y=\"{:.1f}\" "
                                "font-size=\"13\" font-weight=\"bold\">{}</text>\n",
                                x0, top + 18, escape(p.title));
    s += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" "
                     "fill=\"none\" stroke=\"black\"/>\n",
                     x0, y0, x1 - x0, y1 - y0);
    const double xs = nice_step(xmax - xmin, 8);
    for (double v = std::ceil(xmin / xs) * xs; v <= xmax + 1e-12; v += xs) {
      s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" "
                       "stroke=\"#ddd\"/><text x=\"{0:.1f}\" y=\"{3:.1f}\" "
                       "text-anchor=\"middle\">{4:g}</text>\n",
                       X(v), y0, y1, y1 + 14, std::abs(v) < 1e-12 ? 0.0 : v);
    }
    const double ys = nice_step(ymax - ymin, 5);
    for (double v = std::ceil(ymin / ys) * ys; v <= ymax + 1e-12; v += ys) {
      s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" "
                       "stroke=\"#ddd\"/><text x=\"{3:.1f}\" y=\"{4:.1f}\" "
                       "text-anchor=\"end\">{5:g}</text>\n",
                       x0, Y(v), x1, x0 - 4, Y(v) + 4, std::abs(v) < 1e-12 ? 0.0 : v);
    }
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n",
                     0.5 * (x0 + x1), y1 + 32, escape(p.xlabel));
    s += fmt::format("<text x=\"{0:.1f}\" y=\"{1:.1f}\" text-anchor=\"middle\" "
                     "transform=\"rotate(-90 {0:.1f} {1:.1f})\">{2}</text>\n",
                     x0 - 50, 0.5 * (y0 + y1), escape(p.ylabel));
    for (double h : p.hlines) {
      s += fmt::format("<line class=\"limit\" data-y=\"{:g}\" x1=\"{:.1f}\" y1=\"{:.2f}\" "
                       "x2=\"{:.1f}\" y2=\"{:.2f}\" stroke=\"#d62728\" stroke-dasharray=\"6,4\"/>\n",
                       h, x0, Y(h), x1, Y(h));
    }
    double ly = y0 + 12;
    for (const auto& se : p.series) {
      std::string pts;
      for (std::size_t i = 0; i < se.x.size() && i < se.y.size(); ++i) {
        if (std::isfinite(se.x[i]) && std::isfinite(se.y[i])) {
          pts += fmt::format("{:.2f},{:.2f} ", X(se.x[i]), Y(se.y[i]));
        }
      }
      const char* dash = se.dashed ? " stroke-dasharray=\"4,3\"" : "";
      s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.3\"{} "
                       "points=\"{}\"/>\n",
                       se.color, dash, pts);
      s += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" "
                       "stroke=\"{}\" stroke-width=\"2\"{}/><text x=\"{:.1f}\" y=\"{:.1f}\">{}"
                       "</text>\n",
                       x1 + 8, ly - 4, x1 + 28, ly - 4, se.color, dash, x1 + 32, ly,
                       escape(se.label));
      ly += 15;
    }
    s += "</g>\n";
    return s;
  }

  double width_;
  double panel_h_;
  std::vector<PlotPanel> panels_;
};

// A run as the plotter sees it: a label and its sample records.
struct PlotRun {
  std::string label;
  std::vector<SampleRecord> records;
};

inline const std::vector<std::string>& plot_palette() {
  static const std::vector<std::string> c = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd",
                                             "#8c564b", "#e377c2", "#17becf", "#7f7f7f"};
  return c;
}

namespace detail {

template <class F>
PlotSeries series_of(const PlotRun& run, const std::string& label, const std::string& color,
                     F&& value) {
  PlotSeries s;
  s.label = label;
  s.color = color;
  for (const auto& r : run.records) {
    s.x.push_back(r.t);
    s.y.push_back(value(r));
  }
  return s;
}

}  // namespace detail

inline PlotPanel position_panel(const std::vector<PlotRun>& runs, double p_max) {
  PlotPanel p{"wheel position", "t [s]", "p [m]", {}, {p_max, -p_max}};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& c = plot_palette()[i % plot_palette().size()];
    p.series.push_back(detail::series_of(runs[i], runs[i].label, c,
                                         [](const SampleRecord& r) { return r.x[0]; }));
  }
  return p;
}

inline PlotPanel barrier_panel(const std::vector<PlotRun>& runs) {
  PlotPanel p{"safety function", "t [s]", "h", {}, {0.0}};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& c = plot_palette()[i % plot_palette().size()];
    p.series.push_back(detail::series_of(runs[i], runs[i].label + " h_min", c,
                                         [](const SampleRecord& r) { return r.h_min; }));
  }
  return p;
}

inline PlotPanel input_panel(const PlotRun& run) {
  PlotPanel p{"input", "t [s]", "u", {}, {}};
  PlotSeries des = detail::series_of(run, "u_des", "#7f7f7f",
                                     [](const SampleRecord& r) { return r.u_des; });
  des.dashed = true;
  p.series.push_back(std::move(des));
  p.series.push_back(detail::series_of(run, "u_applied", "#1f77b4",
                                       [](const SampleRecord& r) { return r.u_applied; }));
  return p;
}

// Three files per run: <label>_p.svg, <label>_h.svg, <label>_u.svg.
inline std::vector<std::string> write_run_plots(const PlotRun& run, double p_max,
                                                const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  std::vector<std::string> files;
  auto emit = [&](PlotPanel panel, const std::string& suffix) {
    SvgFigure fig;
    panel.title = run.label + ": " + panel.title;
    fig.add(std::move(panel));
    const std::string path = (base / (run.label + suffix)).string();
    fig.save(path);
    files.push_back(path);
  };
  emit(position_panel({run}, p_max), "_p.svg");
  emit(barrier_panel({run}), "_h.svg");
  emit(input_panel(run), "_u.svg");
  return files;
}

// All runs in one figure: position with the corridor bounds over the safety
// function, one color per run.
inline void write_overlay(const std::vector<PlotRun>& runs, double p_max,
                          const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  SvgFigure fig(900.0, 300.0);
  fig.add(position_panel(runs, p_max));
  fig.add(barrier_panel(runs));
  fig.save(path);
}

}  // namespace sdcbf

#endif  // SDCBF_PLOT_HPP
