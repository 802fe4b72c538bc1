#pragma once

// Plot-ready output: one two-column (log10 S, log10 density) text file per
// curve and an SVG rendering of each panel on log-log axes.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "soclab/histogram.hpp"

namespace soclab {

struct PlotCurve {
  std::string label;  // also the file stem
  LogHistogram histogram;
  double rescale = 1.0;  // plotted as S -> S/rescale, density -> rescale * density
};

/// Log-density curve of a histogram after S -> S/scale.
inline LogCurve transformed_curve(const LogHistogram& h, double scale) {
  LogCurve c = log_density_curve(h);
  const double shift = std::log10(scale);
  for (auto& x : c.x) x -= shift;
  for (auto& y : c.y) y += shift;
  return c;
}

inline void write_plot_data(std::ostream& os, const LogCurve& c) {
  os << "# log10_S log10_density\n";
  std::ostringstream line;
  line.precision(17);
  for (std::size_t i = 0; i < c.x.size(); ++i) {
    line.str({});
    line << c.x[i] << ' ' << c.y[i] << '\n';
    os << line.str();
  }
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

}  // namespace detail

inline void write_svg(std::ostream& os, const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<LogCurve>& curves) {
  constexpr double W = 640, H = 480, ml = 70, mr = 20, mt = 40, mb = 60;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      x0 = std::min(x0, c.x[i]);
      x1 = std::max(x1, c.x[i]);
      y0 = std::min(y0, c.y[i]);
      y1 = std::max(y1, c.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = -1, y1 = 0;
  x0 = std::floor(x0), x1 = std::max(std::ceil(x1), x0 + 1);
  y0 = std::floor(y0), y1 = std::max(std::ceil(y1), y0 + 1);
  const auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
  const auto py = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\"" << H - mt - mb
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  const int xstep = std::max(1, static_cast<int>((x1 - x0) / 8));
  for (int k = static_cast<int>(x0); k <= static_cast<int>(x1); k += xstep)
    os << "<line x1=\"" << detail::fmt(px(k)) << "\" y1=\"" << H - mb << "\" x2=\"" << detail::fmt(px(k))
       << "\" y2=\"" << H - mb + 5 << "\" stroke=\"black\"/><text x=\"" << detail::fmt(px(k)) << "\" y=\""
       << H - mb + 20 << "\" text-anchor=\"middle\">1e" << k << "</text>\n";
  const int ystep = std::max(1, static_cast<int>((y1 - y0) / 8));
  for (int k = static_cast<int>(y0); k <= static_cast<int>(y1); k += ystep)
    os << "<line x1=\"" << ml - 5 << "\" y1=\"" << detail::fmt(py(k)) << "\" x2=\"" << ml << "\" y2=\""
       << detail::fmt(py(k)) << "\" stroke=\"black\"/><text x=\"" << ml - 8 << "\" y=\"" << detail::fmt(py(k) + 4)
       << "\" text-anchor=\"end\">1e" << k << "</text>\n";
  os << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">S</text>\n";
  os << "<text x=\"18\" y=\"" << (mt + H - mb) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << (mt + H - mb) / 2 << ")\">P(S)</text>\n";
  for (std::size_t s = 0; s < curves.size(); ++s) {
    const char* color = palette[s % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < curves[s].x.size(); ++i)
      os << (i ? " " : "") << detail::fmt(px(curves[s].x[i])) << ',' << detail::fmt(py(curves[s].y[i]));
    os << "\"/>\n";
    for (std::size_t i = 0; i < curves[s].x.size(); ++i)
      os << "<circle cx=\"" << detail::fmt(px(curves[s].x[i])) << "\" cy=\"" << detail::fmt(py(curves[s].y[i]))
         << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    const double ly = mt + 18 + 16 * static_cast<double>(s);
    os << "<line x1=\"" << W - mr - 150 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - mr - 130 << "\" y2=\""
       << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << W - mr - 125 << "\" y=\""
       << ly << "\">" << labels[s] << "</text>\n";
  }
  os << "</svg>\n";
}

/// Writes `<label>.dat` for every non-empty curve and `<panel>.svg` holding
/// them all. Empty curves are reported through `warn` and skipped. Returns
/// the paths written.
inline std::vector<std::filesystem::path> emit_plot_data(
    const std::filesystem::path& dir, const std::string& panel, const std::vector<PlotCurve>& curves,
    const std::function<void(const std::string&)>& warn = {}) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  std::vector<std::string> labels;
  std::vector<LogCurve> shown;
  for (const auto& pc : curves) {
    const LogCurve c = transformed_curve(pc.histogram, pc.rescale);
    if (c.empty()) {
      if (warn) warn("curve '" + pc.label + "' is empty; skipped");
      continue;
    }
    const auto path = dir / (pc.label + ".dat");
    std::ofstream f(path);
    write_plot_data(f, c);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    written.push_back(path);
    labels.push_back(pc.rescale == 1.0 ? pc.label : pc.label + " (S/" + detail::fmt(pc.rescale) + ")");
    shown.push_back(c);
  }
  const auto svg = dir / (panel + ".svg");
  std::ofstream f(svg);
  write_svg(f, panel, labels, shown);
  if (!f) throw std::runtime_error("cannot write " + svg.string());
  written.push_back(svg);
  return written;
}

}  // namespace soclab
