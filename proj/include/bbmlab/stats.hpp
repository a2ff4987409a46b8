// Copyright 2026 The bbmlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "bbmlab/errors.hpp"

namespace bbmlab::stats {

inline constexpr double kZ95 = 1.959963984540054;

struct Interval {
  double point;
  double lo;
  double hi;
};

/// Wilson score interval for a binomial proportion.
inline Interval wilson(std::uint64_t successes, std::uint64_t trials, double z = kZ95) {
  if (trials == 0) throw ParameterError("wilson: no trials");
  if (successes > trials) throw ParameterError("wilson: successes exceed trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double den = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / den;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / den;
  // the endpoints are exact at k = 0 and k = n; rounding must not push them past p
  const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  const double hi = successes == trials ? 1.0 : std::min(1.0, centre + half);
  return {p, lo, hi};
}

struct MeanEstimate {
  double mean;
  double se;
  double lo;
  double hi;
  std::size_t n;
};

/// Sample mean with a normal-approximation interval.
inline MeanEstimate mean_ci(std::span<const double> xs, double z = kZ95) {
  if (xs.empty()) throw ParameterError("mean_ci: empty sample");
  const double n = static_cast<double>(xs.size());
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  const double se = xs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return {m, se, m - z * se, m + z * se, xs.size()};
}

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k & 1) ? term : -term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct TestResult {
  double statistic;
  double p_value;
  double df = 0.0;
};

namespace detail {

inline double ks_p_value(double d, double n_eff) {
  const double s = std::sqrt(n_eff);
  return kolmogorov_q((s + 0.12 + 0.11 / s) * d);
}

}  // namespace detail

/// Two-sample Kolmogorov-Smirnov test, asymptotic p-value. Conservative for
/// discrete data.
inline TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ParameterError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, detail::ks_p_value(d, na * nb / (na + nb))};
}

/// One-sample KS test against a cdf, asymptotic p-value. For integer-valued
/// data pass `integer_valued`, so the cdf's left limit at x is read as
/// cdf(x - 1) and atoms are compared correctly.
inline TestResult ks_one_sample(std::vector<double> xs, const std::function<double(double)>& cdf,
                                bool integer_valued = false) {
  if (xs.empty()) throw ParameterError("ks_one_sample: empty sample");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < xs.size()) {
    const double x = xs[i];
    const double below = static_cast<double>(i) / n;
    while (i < xs.size() && xs[i] == x) ++i;
    const double f = cdf(x);
    const double f_left = integer_valued ? cdf(x - 1.0) : f;
    d = std::max({d, std::fabs(static_cast<double>(i) / n - f), std::fabs(below - f_left)});
  }
  return {d, detail::ks_p_value(d, n)};
}

/// Pearson chi-square goodness of fit; df = bins - 1. Expected probabilities
/// must sum to 1 (fold any tail into the last bin).
inline TestResult chi_square_gof(std::span<const std::uint64_t> observed, std::span<const double> expected_prob) {
  if (observed.size() != expected_prob.size() || observed.size() < 2)
    throw ParameterError("chi_square_gof: need >= 2 matching bins");
  double n = 0.0;
  for (auto o : observed) n += static_cast<double>(o);
  if (!(n > 0.0)) throw ParameterError("chi_square_gof: no observations");
  double stat = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double e = n * expected_prob[k];
    if (!(e > 0.0)) throw ParameterError("chi_square_gof: expected count must be positive");
    const double diff = static_cast<double>(observed[k]) - e;
    stat += diff * diff / e;
  }
  const double df = static_cast<double>(observed.size() - 1);
  return {stat, boost::math::gamma_q(0.5 * df, 0.5 * stat), df};
}

struct LineFit {
  double slope;
  double intercept;
  double slope_se;
};

/// Ordinary least squares; slope_se propagates independent per-point
/// standard errors `y_se` (not the residual scatter).
inline LineFit ols(std::span<const double> x, std::span<const double> y, std::span<const double> y_se) {
  if (x.size() != y.size() || x.size() != y_se.size() || x.size() < 2)
    throw ParameterError("ols: need >= 2 matching points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ParameterError("ols: x values are all equal");
  double var = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double c = (x[i] - mx) / sxx;
    var += c * c * y_se[i] * y_se[i];
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx, std::sqrt(var)};
}

}  // namespace bbmlab::stats
