#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vhslice/csv.hpp"
#include "vhslice/experiment.hpp"

// Self-contained SVG charts of sweep results.
namespace vhslice::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // optional half-height of error bars
};

namespace detail {

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return palette[i % 6];
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

inline std::string label(double v) {
  std::ostringstream o;
  o << v;
  return o.str();
}

struct Frame {
  double width = 640, height = 400;
  double left = 70, right = 170, top = 40, bottom = 60;
  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
};

inline void header(std::ostringstream& o, const Frame& f, const std::string& title, const std::string& xlabel,
                   const std::string& ylabel) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << num(f.left + f.plot_w() / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title) << "</text>\n"
    << "<text x=\"" << num(f.left + f.plot_w() / 2) << "\" y=\"" << num(f.height - 15)
    << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n"
    << "<text transform=\"translate(18," << num(f.top + f.plot_h() / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";
}

inline void y_axis(std::ostringstream& o, const Frame& f, double y0, double y1) {
  for (int i = 0; i <= 5; ++i) {
    const double v = y0 + (y1 - y0) * i / 5.0;
    const double py = f.top + f.plot_h() * (1.0 - i / 5.0);
    o << "<line x1=\"" << num(f.left) << "\" x2=\"" << num(f.left + f.plot_w()) << "\" y1=\"" << num(py)
      << "\" y2=\"" << num(py) << "\" stroke=\"#ddd\"/>\n"
      << "<text x=\"" << num(f.left - 6) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">" << label(v)
      << "</text>\n";
  }
  o << "<rect x=\"" << num(f.left) << "\" y=\"" << num(f.top) << "\" width=\"" << num(f.plot_w())
    << "\" height=\"" << num(f.plot_h()) << "\" fill=\"none\" stroke=\"black\"/>\n";
}

inline void legend(std::ostringstream& o, const Frame& f, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = f.top + 10 + 20.0 * static_cast<double>(i);
    const double x = f.left + f.plot_w() + 15;
    o << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 8) << "\" width=\"14\" height=\"10\" fill=\"" << color(i)
      << "\"/>\n<text x=\"" << num(x + 20) << "\" y=\"" << num(y + 1) << "\">" << escape(names[i]) << "</text>\n";
  }
}

}  // namespace detail

// Line chart with markers and optional error bars; y spans [y0, y1].
inline std::string line_chart_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                                  const std::vector<Series>& series, double y0 = 0.0, double y1 = 1.0) {
  using namespace detail;
  Frame f;
  std::ostringstream o;
  header(o, f, title, xlabel, ylabel);
  y_axis(o, f, y0, y1);

  double xmin = INFINITY, xmax = -INFINITY;
  for (const auto& s : series)
    for (double x : s.x) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1;
  if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
  auto px = [&](double x) { return f.left + f.plot_w() * (0.05 + 0.9 * (x - xmin) / (xmax - xmin)); };
  auto py = [&](double y) {
    return f.top + f.plot_h() * (1.0 - (std::clamp(y, y0, y1) - y0) / (y1 - y0));
  };

  std::vector<double> ticks;
  for (const auto& s : series) ticks.insert(ticks.end(), s.x.begin(), s.x.end());
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
  for (double t : ticks)
    o << "<text x=\"" << num(px(t)) << "\" y=\"" << num(f.top + f.plot_h() + 18) << "\" text-anchor=\"middle\">"
      << label(t) << "</text>\n";

  std::vector<std::string> names;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    names.push_back(s.name);
    o << "<polyline fill=\"none\" stroke=\"" << color(i) << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) o << num(px(s.x[k])) << ',' << num(py(s.y[k])) << ' ';
    o << "\"/>\n";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (k < s.err.size() && s.err[k] > 0.0)
        o << "<line x1=\"" << num(px(s.x[k])) << "\" x2=\"" << num(px(s.x[k])) << "\" y1=\""
          << num(py(s.y[k] - s.err[k])) << "\" y2=\"" << num(py(s.y[k] + s.err[k])) << "\" stroke=\"" << color(i)
          << "\"/>\n";
      o << "<circle cx=\"" << num(px(s.x[k])) << "\" cy=\"" << num(py(s.y[k])) << "\" r=\"4\" fill=\"" << color(i)
        << "\"/>\n";
    }
  }
  legend(o, f, names);
  o << "</svg>\n";
  return o.str();
}

// Grouped bars: values[g][b] is bar b of group g.
inline std::string bar_chart_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                                 const std::vector<std::string>& groups, const std::vector<std::string>& bars,
                                 const std::vector<std::vector<double>>& values, double y0 = 0.0, double y1 = 1.0) {
  using namespace detail;
  Frame f;
  f.width = std::max(640.0, 80.0 * static_cast<double>(groups.size()) + f.left + f.right);
  std::ostringstream o;
  header(o, f, title, xlabel, ylabel);
  y_axis(o, f, y0, y1);
  const double gw = f.plot_w() / std::max<std::size_t>(1, groups.size());
  const double bw = 0.8 * gw / std::max<std::size_t>(1, bars.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = f.left + gw * static_cast<double>(g);
    o << "<text x=\"" << num(gx + gw / 2) << "\" y=\"" << num(f.top + f.plot_h() + 18)
      << "\" text-anchor=\"middle\">" << escape(groups[g]) << "</text>\n";
    for (std::size_t b = 0; b < bars.size() && b < values[g].size(); ++b) {
      const double v = std::clamp(values[g][b], y0, y1);
      const double h = f.plot_h() * (v - y0) / (y1 - y0);
      o << "<rect x=\"" << num(gx + 0.1 * gw + bw * static_cast<double>(b)) << "\" y=\""
        << num(f.top + f.plot_h() - h) << "\" width=\"" << num(bw) << "\" height=\"" << num(h) << "\" fill=\""
        << color(b) << "\"/>\n";
    }
  }
  legend(o, f, bars);
  o << "</svg>\n";
  return o.str();
}

inline std::string axis_label(const std::string& sweep) {
  if (sweep == "users") return "teleoperation pairs U";
  if (sweep == "se") return "mean spectral efficiency (bit/s/Hz)";
  if (sweep == "fluctuation") return "SE fluctuation";
  return sweep;
}

inline std::string series_name(RewardVariant v, int t_slice_ms) {
  return std::string(v == RewardVariant::video_haptic ? "video-haptic" : "baseline") + " (" +
         std::to_string(t_slice_ms) + " ms)";
}

// Mean SR per variant/interval over one sweep, with std error bars.
inline std::string sweep_chart(const SweepResult& r, const std::string& sweep) {
  std::map<std::pair<int, int>, Series> by;
  for (const auto& s : r.summarize()) {
    if (s.sweep != sweep) continue;
    auto& ser = by[{static_cast<int>(s.variant), s.t_slice_ms}];
    ser.name = series_name(s.variant, s.t_slice_ms);
    ser.x.push_back(s.param_value);
    ser.y.push_back(s.sr_mean);
    ser.err.push_back(s.sr_std);
  }
  std::vector<Series> series;
  for (auto& [k, s] : by) series.push_back(std::move(s));
  return line_chart_svg("Satisfaction rate over " + axis_label(sweep), axis_label(sweep), "satisfaction rate",
                        series);
}

// One group per sweep point, one bar per variant/interval.
inline std::string interval_chart(const SweepResult& r) {
  std::vector<std::string> groups;
  std::vector<std::pair<int, int>> keys;
  std::map<std::pair<std::string, double>, std::size_t> group_index;
  std::map<std::pair<int, int>, std::size_t> bar_index;
  std::vector<std::vector<double>> values;
  for (const auto& s : r.summarize()) {
    const std::pair<std::string, double> gk{s.sweep, s.param_value};
    if (!group_index.count(gk)) {
      group_index[gk] = groups.size();
      groups.push_back(s.sweep + "=" + detail::label(s.param_value));
      values.emplace_back();
    }
    const std::pair<int, int> bk{static_cast<int>(s.variant), s.t_slice_ms};
    if (!bar_index.count(bk)) {
      bar_index[bk] = keys.size();
      keys.push_back(bk);
    }
    auto& row = values[group_index[gk]];
    if (row.size() <= bar_index[bk]) row.resize(bar_index[bk] + 1, 0.0);
    row[bar_index[bk]] = s.sr_mean;
  }
  std::vector<std::string> bars;
  for (auto [v, t] : keys) bars.push_back(series_name(static_cast<RewardVariant>(v), t));
  return bar_chart_svg("Satisfaction rate by slicing interval", "sweep point", "satisfaction rate", groups, bars,
                       values);
}

// Reads a results CSV back into rows (the all-pairs SR is not stored there).
inline SweepResult read_results_csv(const std::string& path) {
  SweepResult r;
  csv::read_file(path, "sweep,param_value,variant,t_slice_ms,seed,sr,mean_reward",
                 [&](const std::vector<std::string_view>& f, std::size_t line) {
                   if (f.size() != 7)
                     throw ParseError(path, line, "expected 7 fields, got " + std::to_string(f.size()));
                   auto num = [&](std::string_view field, auto& out, const char* name) {
                     if (!csv::parse_number(field, out)) throw ParseError(path, line, std::string("bad ") + name);
                   };
                   ResultRow row;
                   row.sweep = std::string(f[0]);
                   num(f[1], row.param_value, "param_value");
                   try {
                     row.variant = parse_variant(f[2]);
                   } catch (const ConfigError& e) {
                     throw ParseError(path, line, e.what());
                   }
                   num(f[3], row.t_slice_ms, "t_slice_ms");
                   num(f[4], row.trial.seed, "seed");
                   num(f[5], row.trial.sr, "sr");
                   num(f[6], row.trial.mean_reward, "mean_reward");
                   r.rows.push_back(std::move(row));
                 });
  return r;
}

}  // namespace vhslice::plot
