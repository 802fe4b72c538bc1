#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "soclab/histogram.hpp"

namespace soclab {

/// Closed interval in log10 S.
struct LogRange {
  double lo = 0.0;
  double hi = 0.0;
  double decades() const { return hi - lo; }
  bool valid() const { return hi > lo; }
};

inline std::optional<LogRange> intersect(const LogRange& a, const LogRange& b) {
  LogRange r{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
  if (!r.valid()) return std::nullopt;
  return r;
}

struct CollapseReport {
  double scale_factor = 1.0;
  double overlap_lo = 0.0;
  double overlap_hi = 0.0;
  /// sup |log10 P_ref - log10 P_test| over the overlap, in decades of density
  double distance = 0.0;
  double decades_compared = 0.0;
  /// log10 S where the sup is attained
  double worst_at = 0.0;
};

namespace detail {

inline double interpolate(const LogCurve& c, double x) {
  const auto it = std::lower_bound(c.x.begin(), c.x.end(), x);
  if (it == c.x.begin()) return c.y.front();
  if (it == c.x.end()) return c.y.back();
  const auto k = static_cast<std::size_t>(it - c.x.begin());
  const double t = (x - c.x[k - 1]) / (c.x[k] - c.x[k - 1]);
  return c.y[k - 1] + t * (c.y[k] - c.y[k - 1]);
}

}  // namespace detail

/// Rescales `test` by S -> S/A (density -> A * density, preserving
/// normalization) and compares its log-density with `ref`.
///
/// Both curves are linearly interpolated in (log10 S, log10 P); the distance is
/// the sup-norm of their difference over the common support, optionally
/// clipped to `window`. Evaluating at every knot of either curve plus the
/// interval ends makes the sup exact for the piecewise-linear interpolants.
inline CollapseReport rescale_and_compare(const LogHistogram& ref, const LogHistogram& test, double scale,
                                          std::optional<LogRange> window = std::nullopt) {
  if (!(scale > 0.0)) throw std::invalid_argument("rescale factor must be positive");
  const LogCurve a = log_density_curve(ref);
  LogCurve b = log_density_curve(test);
  if (a.empty() || b.empty()) throw DataError("no avalanches");
  const double shift = std::log10(scale);
  for (auto& x : b.x) x -= shift;
  for (auto& y : b.y) y += shift;

  auto overlap = intersect({a.x.front(), a.x.back()}, {b.x.front(), b.x.back()});
  if (overlap && window) overlap = intersect(*overlap, *window);
  if (!overlap) throw DataError("no overlap between rescaled distributions");

  std::vector<double> grid{overlap->lo, overlap->hi};
  for (const LogCurve* c : {&a, static_cast<const LogCurve*>(&b)})
    for (const double x : c->x)
      if (x > overlap->lo && x < overlap->hi) grid.push_back(x);
  std::sort(grid.begin(), grid.end());

  CollapseReport r;
  r.scale_factor = scale;
  r.overlap_lo = overlap->lo;
  r.overlap_hi = overlap->hi;
  r.decades_compared = overlap->decades();
  r.worst_at = overlap->lo;
  for (const double x : grid) {
    const double d = std::abs(detail::interpolate(a, x) - detail::interpolate(b, x));
    if (d > r.distance) {
      r.distance = d;
      r.worst_at = x;
    }
  }
  return r;
}

struct PowerLawWindow {
  LogRange range;           // log10 S edges of the window; empty when none found
  std::size_t bins = 0;     // occupied bins in the window
  double bandwidth_decades() const { return bins ? range.decades() : 0.0; }
};

/// Local log-log slope at every occupied bin, from a least-squares line
/// through the bin and `half_width` occupied neighbours on each side. Bins
/// without a full stencil get NaN.
inline std::vector<double> local_slopes(const LogCurve& c, std::size_t half_width = 2) {
  std::vector<double> slope(c.x.size(), std::nan(""));
  for (std::size_t i = half_width; i + half_width < c.x.size(); ++i) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const std::size_t n = 2 * half_width + 1;
    for (std::size_t k = i - half_width; k <= i + half_width; ++k) {
      sx += c.x[k];
      sy += c.y[k];
      sxx += c.x[k] * c.x[k];
      sxy += c.x[k] * c.y[k];
    }
    const double dn = static_cast<double>(n);
    slope[i] = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
  }
  return slope;
}

/// Widest contiguous run of occupied bins whose local slope lies within
/// `tolerance` of -gamma. The range spans from the lower edge of the first
/// bin to the upper edge of the last.
inline PowerLawWindow detect_power_law_window(const LogHistogram& h, double gamma, double tolerance = 0.15,
                                              std::size_t half_width = 2) {
  std::vector<std::size_t> occupied;
  for (std::size_t i = 0; i < h.bins(); ++i)
    if (h.counts[i] > 0) occupied.push_back(i);
  const LogCurve c = log_density_curve(h);
  const auto slope = local_slopes(c, half_width);

  PowerLawWindow best;
  std::size_t run_start = 0;
  bool in_run = false;
  const auto close_run = [&](std::size_t end) {  // [run_start, end)
    const LogRange r{std::log10(h.lo(occupied[run_start])), std::log10(h.hi(occupied[end - 1]))};
    if (r.decades() > best.range.decades() || best.bins == 0) {
      best.range = r;
      best.bins = end - run_start;
    }
  };
  for (std::size_t k = 0; k < slope.size(); ++k) {
    const bool ok = !std::isnan(slope[k]) && std::abs(slope[k] + gamma) <= tolerance;
    if (ok && !in_run) {
      run_start = k;
      in_run = true;
    } else if (!ok && in_run) {
      close_run(k);
      in_run = false;
    }
  }
  if (in_run) close_run(slope.size());
  return best;
}

}  // namespace soclab
