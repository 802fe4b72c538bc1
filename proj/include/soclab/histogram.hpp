#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace soclab {

/// Raised when a statistics routine is handed unusable data.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Logarithmically binned, normalized density of positive integer sizes.
///
/// Edges are the distinct integers ceil(base^k), k = 0, 1, ..., so every bin
/// [lo, hi) holds hi - lo integers and histograms built with the same base
/// share one edge grid. density = count / (total * width).
struct LogHistogram {
  double base = std::pow(10.0, 0.1);
  std::vector<double> edges;
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;
  std::vector<double> density;

  std::size_t bins() const { return counts.size(); }
  double lo(std::size_t i) const { return edges[i]; }
  double hi(std::size_t i) const { return edges[i + 1]; }
  double width(std::size_t i) const { return edges[i + 1] - edges[i]; }
  /// Geometric mean of the bin edges.
  double center(std::size_t i) const { return std::sqrt(edges[i] * edges[i + 1]); }

  void normalize() {
    density.assign(counts.size(), 0.0);
    for (std::size_t i = 0; i < counts.size(); ++i)
      density[i] = total ? static_cast<double>(counts[i]) / (static_cast<double>(total) * width(i)) : 0.0;
  }
};

/// Integer edge grid ceil(base^k) covering [first, last]. The returned edges
/// satisfy edges.front() <= first and edges.back() > last.
inline std::vector<double> log_edges(std::int64_t first, std::int64_t last, double base) {
  if (!(base > 1.0)) throw std::invalid_argument("log-binning base must exceed 1");
  if (first < 1) throw std::invalid_argument("log-binning needs sizes >= 1");
  const double lb = std::log(base);
  // 1e-12 guards base^k landing a hair above an exact integer.
  const auto edge = [&](long k) { return std::ceil(std::exp(k * lb) * (1.0 - 1e-12)); };
  std::vector<double> edges;
  for (long k = 0;; ++k) {
    const double e = edge(k);
    if (!edges.empty() && e <= edges.back()) continue;
    edges.push_back(e);
    if (e > static_cast<double>(last)) break;
  }
  const auto start = std::upper_bound(edges.begin(), edges.end(), static_cast<double>(first)) - 1;
  edges.erase(edges.begin(), start);
  return edges;
}

inline LogHistogram build_histogram(std::span<const std::int64_t> sizes, double base = std::pow(10.0, 0.1)) {
  if (sizes.empty()) throw DataError("no avalanches");
  const auto [mn, mx] = std::minmax_element(sizes.begin(), sizes.end());
  if (*mn < 1) throw DataError("avalanche sizes must be >= 1 (exclude S = 0 upstream)");
  LogHistogram h;
  h.base = base;
  h.edges = log_edges(*mn, *mx, base);
  h.counts.assign(h.edges.size() - 1, 0);
  for (const auto s : sizes) {
    const auto it = std::upper_bound(h.edges.begin(), h.edges.end(), static_cast<double>(s));
    ++h.counts[static_cast<std::size_t>(it - h.edges.begin()) - 1];
  }
  h.total = static_cast<std::int64_t>(sizes.size());
  h.normalize();
  return h;
}

inline constexpr const char* kHistogramCsvHeader = "bin_lo,bin_hi,count,density";

inline void write_histogram_csv(std::ostream& os, const LogHistogram& h) {
  os << kHistogramCsvHeader << '\n';
  std::ostringstream line;
  line.precision(17);
  for (std::size_t i = 0; i < h.bins(); ++i) {
    line.str({});
    line << h.lo(i) << ',' << h.hi(i) << ',' << h.counts[i] << ',' << h.density[i] << '\n';
    os << line.str();
  }
}

/// Reads a histogram written by write_histogram_csv. Density is recomputed
/// from counts; `base` keeps its default since integer edges do not pin it.
inline LogHistogram read_histogram_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("bin_lo", 0) != 0) throw DataError("not a histogram CSV");
  LogHistogram h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    double lo = 0, hi = 0;
    std::int64_t count = 0;
    char c1 = 0, c2 = 0;
    if (!(row >> lo >> c1 >> hi >> c2 >> count)) throw DataError("malformed histogram row: " + line);
    if (h.edges.empty()) h.edges.push_back(lo);
    if (lo != h.edges.back()) throw DataError("histogram bins are not contiguous");
    h.edges.push_back(hi);
    h.counts.push_back(count);
    h.total += count;
  }
  if (h.counts.empty()) throw DataError("no avalanches");
  h.normalize();
  return h;
}

/// (log10 center, log10 density) for every occupied bin.
struct LogCurve {
  std::vector<double> x;
  std::vector<double> y;
  bool empty() const { return x.empty(); }
};

inline LogCurve log_density_curve(const LogHistogram& h) {
  LogCurve c;
  for (std::size_t i = 0; i < h.bins(); ++i) {
    if (h.counts[i] == 0) continue;
    c.x.push_back(std::log10(h.center(i)));
    c.y.push_back(std::log10(h.density[i]));
  }
  return c;
}

}  // namespace soclab
