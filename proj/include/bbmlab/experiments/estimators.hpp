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

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "bbmlab/errors.hpp"
#include "bbmlab/stats.hpp"
#include "bbmlab/theory.hpp"

namespace bbmlab {

/// Event counts for one horizon of a large-deviation ladder.
struct HorizonEvents {
  double t;
  double r;
  std::uint64_t events;
  std::uint64_t trials;
};

/// (1/r) log P(E_t) with a Wilson-based interval. With no observed events
/// only the upper end is informative: point = hi = log(wilson_hi) / r.
struct HorizonRate {
  double t;
  double r;
  double point;
  double lo;
  double hi;
  bool upper_only;
};

inline HorizonRate horizon_rate(const HorizonEvents& h) {
  if (!(h.r > 0.0)) throw ParameterError("horizon rate: r must be positive");
  const auto w = stats::wilson(h.events, h.trials);
  if (h.events == 0) {
    const double up = std::log(w.hi) / h.r;
    return {h.t, h.r, up, -std::numeric_limits<double>::infinity(), up, true};
  }
  return {h.t, h.r, std::log(w.point) / h.r, std::log(w.lo) / h.r, std::log(w.hi) / h.r, false};
}

struct LDRateFit {
  double slope;  // NaN when one_sided
  double lo;
  double hi;
  bool one_sided;
  std::size_t horizons_used;
  std::vector<HorizonRate> per_horizon;
};

/// Least-squares slope of log P(E_t) against r(t) over horizons with at least
/// one event. Each point's standard error is read off its Wilson interval on
/// the log scale and propagated to the slope. With fewer than two usable
/// horizons the fit degrades to the one-sided bound of the largest horizon.
inline LDRateFit estimate_ld_rate(std::span<const HorizonEvents> horizons) {
  if (horizons.size() < 3) throw ParameterError("estimate_ld_rate: need >= 3 horizons");
  LDRateFit fit{NAN, NAN, NAN, false, 0, {}};
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> se;
  for (const auto& h : horizons) {
    fit.per_horizon.push_back(horizon_rate(h));
    if (h.events == 0) continue;
    const auto w = stats::wilson(h.events, h.trials);
    x.push_back(h.r);
    y.push_back(std::log(w.point));
    se.push_back((std::log(w.hi) - std::log(w.lo)) / (2.0 * stats::kZ95));
  }
  fit.horizons_used = x.size();
  if (x.size() < 2) {
    const HorizonRate* last = &fit.per_horizon.front();
    for (const auto& h : fit.per_horizon)
      if (h.r > last->r) last = &h;
    fit.one_sided = true;
    fit.lo = -std::numeric_limits<double>::infinity();
    fit.hi = last->hi;
    return fit;
  }
  const auto line = stats::ols(x, y, se);
  fit.slope = line.slope;
  fit.lo = line.slope - stats::kZ95 * line.slope_se;
  fit.hi = line.slope + stats::kZ95 * line.slope_se;
  return fit;
}

struct GrowthPoint {
  double t;
  stats::MeanEstimate log_growth;  // (log N_t) / t
  stats::MeanEstimate rescaled;    // (log t)^{2/d} ((log N_t)/t - beta); NaN for t <= 1
  double predicted;                // quenched_growth_exponent; NaN for t <= e
  std::size_t used;
  std::size_t censored;
};

/// Per-time growth statistics over uncensored replicas. `n_t[i][k]` is
/// replica i's N at times[k].
inline std::vector<GrowthPoint> estimate_growth_exponent(int dim, double nu, double beta, std::span<const double> times,
                                                         const std::vector<std::vector<double>>& n_t,
                                                         const std::vector<bool>& censored) {
  if (n_t.size() != censored.size()) throw ParameterError("estimate_growth_exponent: size mismatch");
  std::vector<GrowthPoint> out;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    std::vector<double> g;
    std::vector<double> resc;
    std::size_t cens = 0;
    for (std::size_t i = 0; i < n_t.size(); ++i) {
      if (censored[i]) {
        ++cens;
        continue;
      }
      const double v = std::log(n_t[i][k]) / t;
      g.push_back(v);
      resc.push_back(t > 1.0 ? std::pow(std::log(t), 2.0 / dim) * (v - beta) : NAN);
    }
    GrowthPoint p{t, {NAN, NAN, NAN, NAN, 0}, {NAN, NAN, NAN, NAN, 0}, NAN, g.size(), cens};
    if (!g.empty()) {
      p.log_growth = stats::mean_ci(g);
      p.rescaled = stats::mean_ci(resc);
    }
    if (t > std::numbers::e && nu > 0.0) p.predicted = theory::quenched_growth_exponent(dim, nu, beta, t).exponent;
    out.push_back(p);
  }
  return out;
}

}  // namespace bbmlab
