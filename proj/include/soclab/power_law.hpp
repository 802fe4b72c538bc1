#pragma once

// Discrete power-law fitting: maximum likelihood for P(S) ~ S^-gamma on a
// window [s_min, s_max] of the integers, with the lower cutoff optionally
// chosen by minimizing the Kolmogorov-Smirnov distance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "soclab/histogram.hpp"

namespace soclab {

/// sum_{s=a}^{b} s^-gamma for 1 <= a <= b.
///
/// The first terms are summed directly; the remainder uses Euler-Maclaurin
/// with corrections through the fifth derivative, which keeps the relative
/// error near 1e-13 for a >= 1 and gamma in [0, 10].
inline double power_sum(double gamma, std::int64_t a, std::int64_t b) {
  if (a < 1 || b < a) return 0.0;
  constexpr std::int64_t kDirect = 16;
  double direct = 0.0;
  const std::int64_t stop = std::min(b, a + kDirect - 1);
  for (std::int64_t s = a; s <= stop; ++s) direct += std::pow(static_cast<double>(s), -gamma);
  if (stop == b) return direct;

  const double m = static_cast<double>(stop + 1);
  const double n = static_cast<double>(b);
  const auto f = [&](double s) { return std::pow(s, -gamma); };
  // integral_m^n s^-gamma ds, stable near gamma = 1
  const double log_ratio = std::log(n / m);
  const double x = (1.0 - gamma) * log_ratio;
  const double integral = std::pow(m, 1.0 - gamma) * log_ratio * (x == 0.0 ? 1.0 : std::expm1(x) / x);
  // odd derivatives of s^-gamma: f^(k)(s) = (-1)^k gamma (gamma+1)...(gamma+k-1) s^(-gamma-k)
  const auto deriv = [&](int k, double s) {
    double c = 1.0;
    for (int j = 0; j < k; ++j) c *= -(gamma + j);
    return c * std::pow(s, -gamma - k);
  };
  const double em = integral + 0.5 * (f(m) + f(n)) + (deriv(1, n) - deriv(1, m)) / 12.0 -
                    (deriv(3, n) - deriv(3, m)) / 720.0 + (deriv(5, n) - deriv(5, m)) / 30240.0;
  return direct + em;
}

struct PowerLawFit {
  double gamma = 0.0;
  std::int64_t s_min = 0;
  std::int64_t s_max = 0;
  double ks_distance = 0.0;
  std::int64_t n_tail = 0;
  /// Asymptotic standard error from the Fisher information of the truncated law.
  double sigma = 0.0;

  /// (gamma - 1)/sqrt(n_tail), the textbook error for an untruncated tail.
  double standard_error() const { return (gamma - 1.0) / std::sqrt(static_cast<double>(n_tail)); }
};

struct FixedMin {
  std::int64_t value = 1;
};
struct KSMinimize {};
using SMinPolicy = std::variant<FixedMin, KSMinimize>;

inline constexpr std::int64_t kMinTailSamples = 50;

namespace detail {

struct Tail {
  std::span<const std::int64_t> values;  // sorted, within [s_min, s_max]
  double mean_log = 0.0;
};

/// Sorted sample with prefix sums of ln S for O(1) tail means.
struct SortedSample {
  std::vector<std::int64_t> values;
  std::vector<double> log_prefix;  // log_prefix[i] = sum_{k<i} ln values[k]

  explicit SortedSample(std::span<const std::int64_t> sizes) : values(sizes.begin(), sizes.end()) {
    std::sort(values.begin(), values.end());
    log_prefix.resize(values.size() + 1, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i)
      log_prefix[i + 1] = log_prefix[i] + std::log(static_cast<double>(values[i]));
  }

  Tail tail(std::int64_t s_min, std::int64_t s_max) const {
    const auto a = static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), s_min) - values.begin());
    const auto b = static_cast<std::size_t>(std::upper_bound(values.begin(), values.end(), s_max) - values.begin());
    Tail t;
    if (b > a) {
      t.values = std::span<const std::int64_t>(values).subspan(a, b - a);
      t.mean_log = (log_prefix[b] - log_prefix[a]) / static_cast<double>(b - a);
    }
    return t;
  }
};

inline double mle_gamma(const Tail& t, std::int64_t s_min, std::int64_t s_max) {
  const auto neg_loglik = [&](double g) { return g * t.mean_log + std::log(power_sum(g, s_min, s_max)); };
  const auto r = boost::math::tools::brent_find_minima(neg_loglik, 0.0, 10.0, 40);
  return r.first;
}

inline double fisher_sigma(double gamma, std::int64_t s_min, std::int64_t s_max, std::int64_t n) {
  const double h = 1e-4;
  const double lz0 = std::log(power_sum(gamma, s_min, s_max));
  const double lzp = std::log(power_sum(gamma + h, s_min, s_max));
  const double lzm = std::log(power_sum(gamma - h, s_min, s_max));
  const double var_log = (lzp - 2.0 * lz0 + lzm) / (h * h);
  if (!(var_log > 0.0)) return std::numeric_limits<double>::infinity();
  return 1.0 / std::sqrt(static_cast<double>(n) * var_log);
}

/// Discrete KS distance between the empirical tail and the fitted law.
inline double ks_distance(const Tail& t, double gamma, std::int64_t s_min, std::int64_t s_max) {
  const double z = power_sum(gamma, s_min, s_max);
  const double n = static_cast<double>(t.values.size());
  double d = 0.0;
  double model_cdf = 0.0;
  std::int64_t model_at = s_min - 1;
  double emp_prev = 0.0;
  std::size_t i = 0;
  while (i < t.values.size()) {
    const std::int64_t v = t.values[i];
    std::size_t j = i;
    while (j < t.values.size() && t.values[j] == v) ++j;
    // model CDF just below v, where the empirical CDF is still emp_prev
    model_cdf += power_sum(gamma, model_at + 1, v - 1) / z;
    d = std::max(d, std::abs(emp_prev - model_cdf));
    model_cdf += std::pow(static_cast<double>(v), -gamma) / z;
    model_at = v;
    const double emp = static_cast<double>(j) / n;
    d = std::max(d, std::abs(emp - model_cdf));
    emp_prev = emp;
    i = j;
  }
  return d;
}

}  // namespace detail

/// Maximum-likelihood exponent of P(S) ~ S^-gamma on [s_min, s_max].
///
/// `s_max` defaults to the largest observed size. Under KSMinimize the lower
/// cutoff is scanned over the log-bin edge grid (base `base`) and the value
/// with the smallest KS distance wins; ties go to the smaller cutoff.
inline PowerLawFit fit_power_law(std::span<const std::int64_t> sizes, SMinPolicy policy,
                                 std::optional<std::int64_t> s_max_cutoff = std::nullopt,
                                 double base = std::pow(10.0, 0.1)) {
  if (sizes.empty()) throw DataError("no avalanches");
  const detail::SortedSample sample(sizes);
  const auto& sorted = sample.values;
  if (sorted.front() < 1) throw DataError("avalanche sizes must be >= 1");
  if (sorted.front() == sorted.back()) throw DataError("no dynamic range");
  const std::int64_t s_max = s_max_cutoff.value_or(sorted.back());

  const auto fit_at = [&](std::int64_t s_min) {
    PowerLawFit f;
    f.s_min = s_min;
    f.s_max = s_max;
    const auto tail = sample.tail(s_min, s_max);
    f.n_tail = static_cast<std::int64_t>(tail.values.size());
    f.gamma = detail::mle_gamma(tail, s_min, s_max);
    f.ks_distance = detail::ks_distance(tail, f.gamma, s_min, s_max);
    f.sigma = detail::fisher_sigma(f.gamma, s_min, s_max, f.n_tail);
    return f;
  };
  const auto count_tail = [&](std::int64_t s_min) {
    return std::upper_bound(sorted.begin(), sorted.end(), s_max) -
           std::lower_bound(sorted.begin(), sorted.end(), s_min);
  };

  if (const auto* fixed = std::get_if<FixedMin>(&policy)) {
    if (fixed->value < 1) throw DataError("s_min must be >= 1");
    if (s_max <= fixed->value) throw DataError("no dynamic range");
    const auto n = count_tail(fixed->value);
    if (n < kMinTailSamples)
      throw DataError("too few tail samples: " + std::to_string(n) + " in [" + std::to_string(fixed->value) +
                      ", " + std::to_string(s_max) + "], need " + std::to_string(kMinTailSamples));
    return fit_at(fixed->value);
  }

  std::optional<PowerLawFit> best;
  for (const double e : log_edges(1, s_max, base)) {
    const auto s_min = static_cast<std::int64_t>(e);
    if (s_min < sorted.front()) continue;
    if (s_min >= s_max || count_tail(s_min) < kMinTailSamples) break;
    // a window holding one distinct value cannot be fitted
    if (*std::lower_bound(sorted.begin(), sorted.end(), s_min) ==
        *(std::upper_bound(sorted.begin(), sorted.end(), s_max) - 1))
      break;
    auto f = fit_at(s_min);
    if (!best || f.ks_distance < best->ks_distance) best = f;
  }
  if (!best) {
    const auto n = count_tail(sorted.front());
    throw DataError("too few tail samples: " + std::to_string(n) + " at or above s_min=" +
                    std::to_string(sorted.front()) + ", need " + std::to_string(kMinTailSamples));
  }
  return *best;
}

}  // namespace soclab
