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

// Closed-form laws for branching Brownian motion in balls and among
// Poissonian mild obstacles. Every value that is only a leading-order
// asymptotic carries `asymptotic = true`.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "bbmlab/errors.hpp"
#include "bbmlab/geometry.hpp"
#include "bbmlab/kernels.hpp"

namespace bbmlab::theory {

struct Value {
  double value;
  bool asymptotic;
};

/// Volume of the unit ball in R^d.
inline double unit_ball_volume(int dim) {
  check_dim(dim);
  const double h = 0.5 * dim;
  return std::pow(std::numbers::pi, h) / std::tgamma(h + 1.0);
}

namespace detail {

inline double bessel_j(double order, double x) {
  if (order == -0.5) return std::sqrt(2.0 / (std::numbers::pi * x)) * std::cos(x);
  return std::cyl_bessel_j(order, x);
}

}  // namespace detail

/// First positive zero of J_order, order > -1, by scan + bisection.
inline double first_bessel_zero(double order) {
  if (!(order > -1.0)) throw ParameterError("first_bessel_zero: order must exceed -1");
  double a = 1e-3;
  double fa = detail::bessel_j(order, a);
  double b = a;
  double fb = fa;
  for (b = a + 0.05; b < 100.0; b += 0.05) {
    fb = detail::bessel_j(order, b);
    if ((fa > 0.0) != (fb > 0.0)) break;
    a = b;
    fa = fb;
  }
  for (int it = 0; it < 200 && b - a > 4e-16 * b; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = detail::bessel_j(order, m);
    if (fm == 0.0) return m;
    if ((fa > 0.0) == (fm > 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

/// Principal Dirichlet eigenvalue of -Laplacian/2 on the unit d-ball:
/// j_{d/2-1,1}^2 / 2.
inline double lambda_d(int dim) {
  check_dim(dim);
  const double j = first_bessel_zero(0.5 * dim - 1.0);
  return 0.5 * j * j;
}

struct TheoryConstants {
  int dim;
  double lambda_d;
  double omega_d;
  double nu;
  double R0;
  double c_d_nu;
};

inline TheoryConstants constants(int dim, double nu) {
  if (!(nu > 0.0)) throw ParameterError("theory constants: nu must be positive");
  TheoryConstants c{};
  c.dim = dim;
  c.lambda_d = lambda_d(dim);
  c.omega_d = unit_ball_volume(dim);
  c.nu = nu;
  c.R0 = std::pow(dim / (nu * c.omega_d), 1.0 / dim);
  c.c_d_nu = c.lambda_d * std::pow(dim / (nu * c.omega_d), -2.0 / dim);
  return c;
}

inline double rate_constant(int dim, double nu) { return constants(dim, nu).c_d_nu; }

/// P_0(|X_s| < r, s <= t). Exact series for d = 1; leading order
/// exp(-lambda_d t / r^2) otherwise.
inline Value confinement_probability_series(int dim, double r, double t) {
  check_dim(dim);
  if (!(r > 0.0) || !(t > 0.0)) throw ParameterError("confinement probability: r and t must be positive");
  if (dim == 1) return {interval_survival(0.0, r, t), false};
  return {std::exp(-lambda_d(dim) * t / (r * r)), true};
}

/// P_0(sup_{s<=t} |X_s| > k t). Exact for d = 1; leading order otherwise.
inline Value displacement_tail(int dim, double k, double t) {
  check_dim(dim);
  if (!(k > 0.0) || !(t > 0.0)) throw ParameterError("displacement tail: k and t must be positive");
  if (dim == 1) return {interval_exit_probability(0.0, k * t, t), false};
  return {std::exp(-0.5 * k * k * t), true};
}

/// Yule law at time t: P(N_t = k).
inline double yule_pmf(double beta, double t, std::int64_t k) {
  if (k < 1) throw DomainError("yule_pmf: k must be >= 1");
  if (!(beta > 0.0) || !(t >= 0.0)) throw ParameterError("yule_pmf: beta > 0 and t >= 0 required");
  if (t == 0.0) return k == 1 ? 1.0 : 0.0;
  return std::exp(-beta * t + static_cast<double>(k - 1) * std::log(-std::expm1(-beta * t)));
}

/// P(N_t > k).
inline double yule_tail(double beta, double t, std::int64_t k) {
  if (k < 1) throw DomainError("yule_tail: k must be >= 1");
  if (!(beta > 0.0) || !(t >= 0.0)) throw ParameterError("yule_tail: beta > 0 and t >= 0 required");
  if (t == 0.0) return 0.0;
  return std::exp(static_cast<double>(k) * std::log(-std::expm1(-beta * t)));
}

enum class RateRegime { exact, band };

struct LDRatePrediction {
  double kappa;
  double beta;
  RateRegime regime;
  double value;     // exact regime only
  double band_lo;   // equals value in the exact regime
  double band_hi;
};

/// Limit of log P(n_t < e^{-kappa r(t)} p_t e^{beta t}) / r(t).
inline LDRatePrediction ld_rate_prediction(double kappa, double beta) {
  if (!(kappa > 0.0) || !(beta > 0.0)) throw ParameterError("ld_rate_prediction: kappa and beta must be positive");
  const double knee = std::sqrt(beta / 2.0);
  if (kappa <= knee) return {kappa, beta, RateRegime::exact, -kappa, -kappa, -kappa};
  return {kappa, beta, RateRegime::band, NAN, -std::fmin(kappa, std::sqrt(2.0 * beta)), -knee};
}

struct ExtinctionBound {
  double rate;        // P(n_t = 0) >= exp(-rate r(t) (1 + o(1)))
  double time_scale;  // k: branching suppressed over [0, k r(t)]
};

inline ExtinctionBound extinction_rate_lower_bound(double beta) {
  if (!(beta > 0.0)) throw ParameterError("extinction bound: beta must be positive");
  const double s = std::sqrt(2.0 * beta);
  return {s, 1.0 / s};
}

struct GrowthPrediction {
  double exponent;  // predicted (log N_t) / t
  double limit;     // limit of (log t)^{2/d} ((log N_t)/t - beta)
  bool asymptotic;
};

inline GrowthPrediction quenched_growth_exponent(int dim, double nu, double beta, double t) {
  if (!(t > std::numbers::e)) throw ParameterError("quenched growth exponent: t must exceed e");
  if (!(beta > 0.0)) throw ParameterError("quenched growth exponent: beta must be positive");
  const double c = rate_constant(dim, nu);
  return {beta - c / std::pow(std::log(t), 2.0 / dim), -c, true};
}

/// Radius scale of the good-point set used for clearing hits.
inline double good_point_radius(int dim, double nu, double t) {
  if (!(t > 1.0)) throw ParameterError("good_point_radius: t must exceed 1");
  const double r0 = constants(dim, nu).R0;
  return r0 / 3.0 * std::pow(1.0 / (6.0 * dim), 1.0 / dim) * std::pow(std::log(t), 1.0 / dim);
}

}  // namespace bbmlab::theory
