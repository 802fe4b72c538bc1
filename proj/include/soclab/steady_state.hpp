#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace soclab {

class TransientError : public std::runtime_error {
public:
  TransientError(const std::string& what, double final_slope)
      : std::runtime_error(what), final_slope_(final_slope) {}
  double final_slope() const { return final_slope_; }

private:
  double final_slope_;
};

/// Least-squares slope of y over [start, start + window), times window and
/// divided by the window mean: the fitted relative drift across the window.
/// Uses prefix sums of y and t*y so every window costs O(1).
class DriftScanner {
public:
  explicit DriftScanner(std::span<const std::int64_t> series) : n_(series.size()) {
    sum_.resize(n_ + 1, 0.0);
    tsum_.resize(n_ + 1, 0.0);
    for (std::size_t t = 0; t < n_; ++t) {
      const double y = static_cast<double>(series[t]);
      sum_[t + 1] = sum_[t] + y;
      tsum_[t + 1] = tsum_[t] + static_cast<double>(t) * y;
    }
  }

  std::size_t size() const { return n_; }

  double relative_drift(std::size_t start, std::size_t window) const {
    const double w = static_cast<double>(window);
    const double sy = sum_[start + window] - sum_[start];
    // shift times to the window origin for conditioning
    const double sty = tsum_[start + window] - tsum_[start] - static_cast<double>(start) * sy;
    const double st = w * (w - 1.0) / 2.0;
    const double stt = (w - 1.0) * w * (2.0 * w - 1.0) / 6.0;
    const double slope = (w * sty - st * sy) / (w * stt - st * st);
    const double mean = sy / w;
    if (mean == 0.0) return slope == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(slope * w / mean);
  }

private:
  std::size_t n_;
  std::vector<double> sum_;
  std::vector<double> tsum_;
};

/// Earliest t such that every window [u, u + window) with u in [t, t + window]
/// has relative drift below `slope_tol`. Requiring the condition over a full
/// window of start positions rejects the spurious zero-slope fit of a window
/// that straddles the end of filling and the following slow overshoot decay.
///
/// Throws TransientError("transient not converged") with the drift of the last
/// window when no such t exists.
inline std::int64_t detect_steady_state(std::span<const std::int64_t> stored, std::int64_t window,
                                        double slope_tol) {
  if (window < 2) throw std::invalid_argument("steady-state window must be >= 2");
  const auto w = static_cast<std::size_t>(window);
  if (stored.size() < 2 * w)
    throw std::invalid_argument("series of length " + std::to_string(stored.size()) +
                                " is shorter than two windows (" + std::to_string(2 * w) + ")");
  const DriftScanner scan(stored);
  std::size_t run = 0;
  for (std::size_t u = 0; u + w <= stored.size(); ++u) {
    run = scan.relative_drift(u, w) < slope_tol ? run + 1 : 0;
    if (run == w + 1) return static_cast<std::int64_t>(u - w);
  }
  const double last = scan.relative_drift(stored.size() - w, w);
  throw TransientError("transient not converged (final relative drift " + std::to_string(last) + ")", last);
}

}  // namespace soclab
