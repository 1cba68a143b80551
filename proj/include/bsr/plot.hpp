#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "bsr/pipeline.hpp"

// Minimal SVG line charts. The CSV files stay the canonical output.

namespace bsr::plot {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x, y, err;
};

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                              const std::vector<Series>& series, bool log_y) {
  const double w = 640, h = 420, left = 70, right = 150, top = 40, bottom = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (log_y && s.y[i] <= 0)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      const double e = i < s.err.size() && std::isfinite(s.err[i]) ? s.err[i] : 0.0;
      const double lo = log_y && s.y[i] - e <= 0 ? s.y[i] : s.y[i] - e;
      y0 = std::min(y0, ty(lo));
      y1 = std::max(y1, ty(s.y[i] + e));
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 1, x1 += 1;
  if (log_y) {
    y0 = std::floor(y0);
    y1 = std::ceil(y1);
  }
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * (w - left - right); };
  auto py = [&](double v) { return h - bottom - (ty(v) - y0) / (y1 - y0) * (h - top - bottom); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
    << "\" stroke=\"black\"/>\n";
  const int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double xv = x0 + (x1 - x0) * i / ticks;
    o << "<text x=\"" << px(xv) << "\" y=\"" << h - bottom + 16 << "\" text-anchor=\"middle\">" << fmt(xv)
      << "</text>\n";
    const double yv = y0 + (y1 - y0) * i / ticks;
    const double ypx = h - bottom - (yv - y0) / (y1 - y0) * (h - top - bottom);
    o << "<text x=\"" << left - 6 << "\" y=\"" << ypx + 4 << "\" text-anchor=\"end\">"
      << (log_y ? "1e" + fmt(yv) : fmt(yv)) << "</text>\n";
  }
  o << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">" << x_label
    << "</text>\n";
  o << "<text transform=\"translate(16," << (top + h - bottom) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << y_label << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    std::string path;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (log_y && s.y[i] <= 0)) continue;
      path += (path.empty() ? "M" : " L") + fmt(px(s.x[i])) + "," + fmt(py(s.y[i]));
      const double e = i < s.err.size() && std::isfinite(s.err[i]) ? s.err[i] : 0.0;
      if (e > 0) {
        const double lo = log_y && s.y[i] - e <= 0 ? s.y[i] : s.y[i] - e;
        o << "<line x1=\"" << px(s.x[i]) << "\" y1=\"" << py(lo) << "\" x2=\"" << px(s.x[i]) << "\" y2=\""
          << py(s.y[i] + e) << "\" stroke=\"" << s.color << "\"/>\n";
      }
      o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << s.color
        << "\"/>\n";
    }
    if (!path.empty())
      o << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << w - right + 12 << "\" y1=\"" << ly << "\" x2=\"" << w - right + 32 << "\" y2=\"" << ly
      << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << w - right + 38 << "\" y=\"" << ly + 4 << "\">" << s.label << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// NMSE curves against the sweep axis, log scale.
inline std::string nmse_chart(const ExperimentReport& rep) {
  std::vector<Series> series = {{"NMSE theta", "#1f77b4", {}, {}, {}},
                                {"NMSE alpha", "#d62728", {}, {}, {}},
                                {"NMSE phi", "#2ca02c", {}, {}, {}},
                                {"NMSE h", "#9467bd", {}, {}, {}}};
  for (const auto& a : rep.aggregates) {
    const Moments* m[] = {&a.nmse_theta, &a.nmse_alpha, &a.nmse_phi, &a.nmse_h};
    for (std::size_t k = 0; k < series.size(); ++k) {
      series[k].x.push_back(a.sweep_value);
      series[k].y.push_back(m[k]->mean);
      series[k].err.push_back(m[k]->se);
    }
  }
  const bool antennas = rep.config.axis == SweepAxis::antennas;
  return line_chart("NMSE", antennas ? "antennas N" : "SNR (dB)", "mean NMSE", series, true);
}

/// Detection rate against the sweep axis.
inline std::string dr_chart(const ExperimentReport& rep) {
  Series s{"DR", "#ff7f0e", {}, {}, {}};
  for (const auto& a : rep.aggregates) {
    s.x.push_back(a.sweep_value);
    s.y.push_back(a.dr.mean);
    s.err.push_back(a.dr.se);
  }
  const bool antennas = rep.config.axis == SweepAxis::antennas;
  return line_chart("Detection rate", antennas ? "antennas N" : "SNR (dB)", "mean DR", {s}, false);
}

}  // namespace bsr::plot
