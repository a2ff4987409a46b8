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
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "bbmlab/errors.hpp"
#include "bbmlab/geometry.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

// ---------------------------------------------------------------------------
// Elementary samplers

inline double sample_exponential(RngStream& stream, double rate) { return stream.exponential(rate); }

/// One Brownian increment over a time step: i.i.d. N(0, step) coordinates.
inline std::vector<double> sample_gaussian_step(RngStream& stream, int dim, double step) {
  if (dim < 1) throw ParameterError("sample_gaussian_step: dim must be >= 1");
  if (!(step > 0.0)) throw ParameterError("sample_gaussian_step: step must be positive");
  std::vector<double> out(static_cast<std::size_t>(dim));
  stream.normals(out, step);
  return out;
}

/// Homogeneous PPP restricted to a box: Poisson count, then uniform placement.
inline PointSet sample_ppp_in_box(RngStream& stream, double intensity, const Box& box) {
  if (!(intensity >= 0.0) || !std::isfinite(intensity)) throw ParameterError("sample_ppp_in_box: intensity must be >= 0");
  if (!box.nondegenerate()) throw ParameterError("sample_ppp_in_box: degenerate box");
  PointSet pts{box.dim(), {}};
  const std::uint64_t n = stream.poisson(intensity * box.volume());
  pts.coords.reserve(n * static_cast<std::size_t>(box.dim()));
  for (std::uint64_t k = 0; k < n; ++k)
    for (int i = 0; i < box.dim(); ++i) pts.coords.push_back(box.lo[i] + (box.hi[i] - box.lo[i]) * stream.uniform());
  return pts;
}

// ---------------------------------------------------------------------------
// Bridge corrections

struct BridgeQuery {
  double from_radius;
  double to_radius;
  double barrier;
  double step;
};

/// One-sided Brownian-bridge level-crossing probability, applied to the
/// radial coordinate. Endpoints at or beyond the barrier make crossing certain.
inline double bridge_crossing_probability(const BridgeQuery& q) {
  if (!(q.step > 0.0)) throw ParameterError("bridge_crossing_probability: step must be positive");
  if (q.from_radius >= q.barrier || q.to_radius >= q.barrier) return 1.0;
  const double p = std::exp(-2.0 * (q.barrier - q.from_radius) * (q.barrier - q.to_radius) / q.step);
  return std::clamp(p, 0.0, 1.0);
}

/// Inverse of bridge_crossing_probability in the barrier: the level `m` with
/// crossing probability `u`. With u ~ U(0,1) this samples the bridge maximum.
inline double bridge_max_quantile(double from_radius, double to_radius, double step, double u) noexcept {
  const double d = from_radius - to_radius;
  return 0.5 * (from_radius + to_radius + std::sqrt(d * d - 2.0 * step * std::log(u)));
}

/// Probability that a 1-d Brownian bridge from x to y over time dt stays in
/// (-r, r). Method of images; exact.
inline double interval_bridge_stay_probability(double x, double y, double r, double dt) {
  if (!(dt > 0.0) || !(r > 0.0)) throw ParameterError("interval_bridge_stay_probability: r and dt must be positive");
  if (std::fabs(x) >= r || std::fabs(y) >= r) return 0.0;
  const double w = 2.0 * r;
  const double b = y - x;
  const double inv = 1.0 / (2.0 * dt);
  auto direct = [&](double k) {
    const double a = b + 2.0 * k * w;
    return std::exp(-(a - b) * (a + b) * inv);
  };
  auto reflected = [&](double k) {
    const double a = y + x + w + 2.0 * k * w;
    return std::exp(-(a - b) * (a + b) * inv);
  };
  double sum = 1.0 - reflected(0.0);
  for (int k = 1; k < 10000; ++k) {
    const double t = direct(k) + direct(-k) - reflected(k) - reflected(-k);
    sum += t;
    if (direct(k) + direct(-k) + reflected(k) + reflected(-k) < 1e-18) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

namespace detail {

inline double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double normal_sf(double z) noexcept { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// Image expansion of the interval exit probability; accurate when
// tau / r^2 is small. Also returns the stay probability.
inline std::array<double, 2> interval_images(double x, double r, double tau) noexcept {
  const double s = std::sqrt(tau);
  // P(z + sqrt(tau) N in (-r, r)), taken from whichever tail avoids cancellation
  auto mass = [&](double z) {
    const double hi = (r - z) / s;
    const double lo = (-r - z) / s;
    return lo > 0.0 ? normal_sf(lo) - normal_sf(hi) : normal_cdf(hi) - normal_cdf(lo);
  };
  const double xr = -2.0 * r - x;
  double exit = normal_sf((r - x) / s) + normal_cdf((-r - x) / s) + mass(xr);
  double stay = mass(x) - mass(xr);
  for (int k = 1; k < 10000; ++k) {
    const double shift = 4.0 * r * k;
    const double t = mass(x + shift) + mass(x - shift) - mass(xr + shift) - mass(xr - shift);
    exit -= t;
    stay += t;
    if (mass(x + shift) + mass(x - shift) + mass(xr + shift) + mass(xr - shift) < 1e-300) break;
  }
  return {std::clamp(stay, 0.0, 1.0), std::clamp(exit, 0.0, 1.0)};
}

// Eigenfunction expansion, returned as log survival; accurate when
// tau / r^2 is not small. Terms are dropped below 1e-17 relative size.
inline double interval_log_survival_eigen(double x, double r, double tau) noexcept {
  const double q = std::numbers::pi * std::numbers::pi * tau / (8.0 * r * r);
  const double theta = std::numbers::pi * x / (2.0 * r);
  double sum = 0.0;
  for (int n = 0;; ++n) {
    const double m = 2.0 * n + 1.0;
    const double damp = std::exp(-(m * m - 1.0) * q) / m;
    if (damp < 1e-17) break;
    sum += ((n & 1) ? -1.0 : 1.0) * std::cos(m * theta) * damp;
  }
  if (!(sum > 0.0)) return -std::numeric_limits<double>::infinity();
  return std::log(4.0 / std::numbers::pi * sum) - q;
}

inline constexpr double kEigenRegime = 0.5;

}  // namespace detail

/// log P_x(|X_s| < r for all s <= tau) for 1-d Brownian motion.
inline double interval_log_survival(double x, double r, double tau) {
  if (!(r > 0.0)) throw ParameterError("interval survival: r must be positive");
  if (std::fabs(x) >= r) return -std::numeric_limits<double>::infinity();
  if (!(tau > 0.0)) return 0.0;
  const double q = std::numbers::pi * std::numbers::pi * tau / (8.0 * r * r);
  if (q >= detail::kEigenRegime) return detail::interval_log_survival_eigen(x, r, tau);
  return std::log(detail::interval_images(x, r, tau)[0]);
}

inline double interval_survival(double x, double r, double tau) { return std::exp(interval_log_survival(x, r, tau)); }

/// 1 - interval_survival, computed without cancellation for small tau.
inline double interval_exit_probability(double x, double r, double tau) {
  if (!(r > 0.0)) throw ParameterError("interval exit: r must be positive");
  if (std::fabs(x) >= r) return 1.0;
  if (!(tau > 0.0)) return 0.0;
  const double q = std::numbers::pi * std::numbers::pi * tau / (8.0 * r * r);
  if (q >= detail::kEigenRegime) return -std::expm1(detail::interval_log_survival_eigen(x, r, tau));
  return detail::interval_images(x, r, tau)[1];
}

// ---------------------------------------------------------------------------
// Monitored Brownian paths on a time grid

template <int Dim>
using Vec = std::array<double, Dim>;

template <int Dim>
inline double radius(const Vec<Dim>& x) noexcept {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

/// Boundary monitoring on a global grid of cells of length `step`, each
/// optionally refined `refine` times by dyadic Brownian-bridge midpoints.
///
/// Every cell's randomness is addressed by (path stream, cell index, node), so
/// the coarse cell endpoints are identical at every refinement level and only
/// the monitoring resolution changes between levels.
struct SubstepMonitor {
  double step = 1e-3;
  int refine = 0;

  void validate() const {
    if (!(step > 0.0)) throw ParameterError("monitor step must be positive");
    if (refine < 0 || refine > 12) throw ParameterError("monitor refine must be in [0, 12]");
  }
};

namespace detail {

inline constexpr std::uint64_t kCellTag = 0xC0FFEE0000000000ull;
inline constexpr std::uint64_t kUniformDraw = 16;
inline constexpr std::uint64_t kNodeDrawBase = 32;
inline constexpr std::uint64_t kDrawsPerNode = 16;

struct Knot {
  double t;
  double radius;
};

// log P(max radius over all pieces < level) under the radial bridge law.
inline double log_stay_below(const std::vector<Knot>& knots, double level) noexcept {
  double logstay = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double a = knots[i].radius;
    const double b = knots[i + 1].radius;
    if (a >= level || b >= level) return -INFINITY;
    logstay += std::log1p(-std::exp(-2.0 * (level - a) * (level - b) / (knots[i + 1].t - knots[i].t)));
  }
  return logstay;
}

// Sampled maximum radius over consecutive bridge pieces, by inverting the
// product of one-sided crossing survivals at the single uniform `u`.
// A result equal to `floor` only means the maximum is <= floor, which is all a
// running maximum needs.
inline double pieces_max_quantile(const std::vector<Knot>& knots, double u, double floor = 0.0) noexcept {
  const std::size_t pieces = knots.size() - 1;
  auto piece_q = [&](std::size_t i, double v) {
    return bridge_max_quantile(knots[i].radius, knots[i + 1].radius, knots[i + 1].t - knots[i].t, v);
  };
  if (pieces == 1) return piece_q(0, u);
  if (floor > 0.0 && log_stay_below(knots, floor) >= std::log1p(-u)) return floor;
  double lo = 0.0;
  double hi = 0.0;
  const double v = -std::expm1(std::log1p(-u) / static_cast<double>(pieces));
  for (std::size_t i = 0; i < pieces; ++i) {
    lo = std::max(lo, piece_q(i, u));
    hi = std::max(hi, piece_q(i, v));
  }
  // Root of g(m) = log_stay_below(m) - log(1 - u), increasing in m, by
  // Illinois regula falsi; plain bisection while g(lo) is -inf.
  const double target = std::log1p(-u);
  double glo = log_stay_below(knots, lo) - target;
  double ghi = log_stay_below(knots, hi) - target;
  if (!(ghi > 0.0)) return hi;
  int side = 0;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    if (std::isfinite(glo)) mid = std::clamp(hi - ghi * (hi - lo) / (ghi - glo), lo, hi);
    const double g = log_stay_below(knots, mid) - target;
    if (g == 0.0) return mid;
    if (g < 0.0) {
      lo = mid;
      glo = g;
      if (side == -1) ghi *= 0.5;
      side = -1;
    } else {
      hi = mid;
      ghi = g;
      if (side == 1 && std::isfinite(glo)) glo *= 0.5;
      side = 1;
    }
    if (mid == lo && mid == hi) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Advances a Brownian path from (t_from, x) to t_to under substep monitoring.
/// Returns the sampled maximum radius over [t_from, t_to]; stops early (with
/// `x` left at the last cell boundary) once that maximum exceeds `stop_above`.
template <int Dim>
double advance_monitored(Vec<Dim>& x, double t_from, double t_to, const RngStream& path,
                         const SubstepMonitor& mon, double stop_above = INFINITY) {
  const double h = mon.step;
  double sup = radius<Dim>(x);
  double u = t_from;
  auto j = static_cast<std::int64_t>(std::floor(u / h));
  if (static_cast<double>(j + 1) * h <= u) ++j;
  std::vector<detail::Knot> knots;
  std::vector<Vec<Dim>> pos;
  std::array<double, 2 * ((Dim + 1) / 2)> z{};
  while (u < t_to) {
    const double cell_lo = static_cast<double>(j) * h;
    const double v = std::min(static_cast<double>(j + 1) * h, t_to);
    if (!(v > u)) {
      ++j;
      continue;
    }
    RngStream cs = path.substream(detail::kCellTag + static_cast<std::uint64_t>(j));
    // a piece starting inside a cell gets its own draws, keyed by its start
    if (u > cell_lo) cs = cs.substream(std::bit_cast<std::uint64_t>(u));
    knots.clear();
    pos.clear();
    knots.push_back({u, radius<Dim>(x)});
    pos.push_back(x);
    cs.normals(z, v - u);
    Vec<Dim> xv = x;
    for (int i = 0; i < Dim; ++i) xv[i] += z[i];
    knots.push_back({v, radius<Dim>(xv)});
    pos.push_back(xv);
    for (int level = 1; level <= mon.refine; ++level) {
      const std::int64_t den = std::int64_t{1} << level;
      for (std::int64_t k = 1; k < den; k += 2) {
        const double s = cell_lo + h * static_cast<double>(k) / static_cast<double>(den);
        if (!(s > u && s < v)) continue;
        std::size_t right = 1;
        while (knots[right].t < s) ++right;
        const std::size_t left = right - 1;
        const double tl = knots[left].t;
        const double tr = knots[right].t;
        const double wgt = (s - tl) / (tr - tl);
        cs.seek(detail::kNodeDrawBase + detail::kDrawsPerNode * static_cast<std::uint64_t>(den + k));
        cs.normals(z, (s - tl) * (tr - s) / (tr - tl));
        Vec<Dim> xs;
        for (int i = 0; i < Dim; ++i) xs[i] = pos[left][i] + wgt * (pos[right][i] - pos[left][i]) + z[i];
        knots.insert(knots.begin() + static_cast<std::ptrdiff_t>(right), {s, radius<Dim>(xs)});
        pos.insert(pos.begin() + static_cast<std::ptrdiff_t>(right), xs);
      }
    }
    cs.seek(detail::kUniformDraw);
    sup = std::max(sup, detail::pieces_max_quantile(knots, cs.uniform(), sup));
    x = xv;
    u = v;
    ++j;
    if (sup > stop_above) break;
  }
  return sup;
}

/// Whether a Brownian path from the origin stays within radius r up to time t,
/// under substep monitoring.
template <int Dim>
bool simulate_confinement(const RngStream& path, double r, double t, const SubstepMonitor& mon) {
  Vec<Dim> x{};
  return advance_monitored<Dim>(x, 0.0, t, path, mon, r) <= r;
}

}  // namespace bbmlab
