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

// Particle engine for strictly dyadic branching Brownian motion.
//
// A replica is processed in time slices; inside a slice each particle's
// subtree is followed depth-first up to the slice end. All randomness of a
// particle comes from its own stream, and offspring streams are substreams of
// the parent's, so a replica's result does not depend on processing order.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "bbmlab/environment.hpp"
#include "bbmlab/errors.hpp"
#include "bbmlab/geometry.hpp"
#include "bbmlab/kernels.hpp"
#include "bbmlab/radius.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

/// Calls fn.template operator()<D>() with D equal to the runtime dimension.
template <class Fn>
decltype(auto) dispatch_dim(int dim, Fn&& fn) {
  check_dim(dim);
  switch (dim) {
    case 1: return fn.template operator()<1>();
    case 2: return fn.template operator()<2>();
    case 3: return fn.template operator()<3>();
    case 4: return fn.template operator()<4>();
    case 5: return fn.template operator()<5>();
    case 6: return fn.template operator()<6>();
    case 7: return fn.template operator()<7>();
    case 8: return fn.template operator()<8>();
    case 9: return fn.template operator()<9>();
    default: return fn.template operator()<10>();
  }
}

inline constexpr std::uint64_t kDefaultCap = 10'000'000;

template <int Dim>
struct Particle {
  Vec<Dim> position{};
  double birth_time = 0.0;
  double time = 0.0;
  double next_branch_candidate = 0.0;
  double ancestral_sup_norm = 0.0;
  double weight = 1.0;
  bool alive = true;
  RngStream stream;
};

template <int Dim>
struct Population {
  std::vector<Particle<Dim>> particles;
  double current_time = 0.0;
  std::uint64_t total_born = 1;
  std::uint64_t cap = kDefaultCap;
  bool censored = false;
};

namespace detail {

inline constexpr std::uint64_t kChildTag = 0xB0B0000000000000ull;
inline constexpr std::uint64_t kRouletteTag = 0x7E11000000000000ull;

template <int Dim>
Particle<Dim> founder(const RngStream& stream, double beta) {
  Particle<Dim> p;
  p.stream = stream;
  p.next_branch_candidate = p.stream.exponential(beta);
  return p;
}

template <int Dim>
void brownian_advance(Particle<Dim>& p, double to) {
  const double dt = to - p.time;
  if (dt > 0.0) {
    Vec<Dim> z;
    p.stream.normals(z, dt);
    for (int i = 0; i < Dim; ++i) p.position[i] += z[i];
  }
  p.time = to;
}

inline void check_cap(std::uint64_t cap) {
  if (cap < 1) throw ParameterError("population cap must be >= 1");
}

// Sorted, de-duplicated union of the given times.
inline std::vector<double> merge_times(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

inline std::vector<double> checked_observations(std::vector<double> obs, double t_end) {
  if (obs.empty()) obs.push_back(t_end);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (!(obs[i] > 0.0) || obs[i] > t_end) throw ParameterError("observation times must lie in (0, t_end]");
    if (i > 0 && !(obs[i] > obs[i - 1])) throw ParameterError("observation times must be strictly increasing");
  }
  return obs;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Free and mild-obstacle growth

/// What to do when a replica would exceed its population cap.
///  - censor: stop and flag the replica.
///  - thin:   keep at most `thin_target` particles at slice ends by unbiased
///            Russian roulette (survivors carry weight 1/keep), so N_t is
///            estimated by the total weight. The hard cap still censors.
enum class OverflowPolicy { censor, thin };

struct ObstacleBranchSpec {
  double beta;
  double beta_bar;
  const TrapField* field = nullptr;  // null: no traps

  void validate() const {
    if (!(beta > 0.0)) throw ParameterError("obstacle: beta must be positive");
    if (!(beta_bar >= 0.0 && beta_bar <= beta)) throw ParameterError("obstacle: beta_bar must be in [0, beta]");
  }
};

struct GrowthOptions {
  std::vector<double> observation_times;  // empty: {t_end}
  std::uint64_t cap = kDefaultCap;
  OverflowPolicy overflow = OverflowPolicy::censor;
  std::size_t thin_target = 1u << 14;
};

struct GrowthOutcome {
  std::vector<double> times;
  std::vector<double> N;             // exact counts unless `thinned`; NaN after censoring
  std::vector<double> range_radius;  // max |x| over vertices up to each time
  bool censored = false;
  bool thinned = false;
  std::uint64_t total_born = 1;
};

namespace detail {

template <int Dim>
GrowthOutcome run_growth(const RngStream& stream, const ObstacleBranchSpec& spec, double t_end,
                         const GrowthOptions& opt) {
  spec.validate();
  if (!(t_end > 0.0)) throw ParameterError("t_end must be positive");
  check_cap(opt.cap);
  if (opt.overflow == OverflowPolicy::thin && opt.thin_target < 2) throw ParameterError("thin_target must be >= 2");
  const TrapField* field = spec.field;
  if (field && field->dim() != Dim) throw ParameterError("obstacle: field dimension mismatch");
  const double beta = spec.beta;

  GrowthOutcome out;
  out.times = checked_observations(opt.observation_times, t_end);
  const std::size_t n_obs = out.times.size();
  out.N.assign(n_obs, NAN);
  std::vector<double> slice_max(n_obs, 0.0);

  std::vector<double> control;
  if (opt.overflow == OverflowPolicy::thin) {
    const double dt = std::numbers::ln2 / beta;
    for (double s = dt; s < t_end; s += dt) control.push_back(s);
  }
  const std::vector<double> ends = merge_times(merge_times(out.times, control), {t_end});

  auto box_exit = [&](const Vec<Dim>& x) {
    double reached = 0.0;
    for (double v : x) reached = std::max(reached, std::fabs(v));
    const double advised = std::sqrt(2.0 * beta) * t_end + 6.0 * std::sqrt(t_end);
    throw EnvironmentTooSmall(reached, std::ceil(std::max(reached, advised)));
  };

  std::vector<Particle<Dim>> pop{founder<Dim>(stream, beta)};
  std::vector<Particle<Dim>> next;
  std::vector<Particle<Dim>> stack;
  std::size_t obs_k = 0;
  for (std::size_t slice = 0; slice < ends.size(); ++slice) {
    const double s1 = ends[slice];
    while (obs_k < n_obs && out.times[obs_k] < s1) ++obs_k;
    // vertices after the previous slice end count toward observation obs_k
    auto record = [&](const Vec<Dim>& x) {
      if (obs_k < n_obs) slice_max[obs_k] = std::max(slice_max[obs_k], radius<Dim>(x));
    };
    next.clear();
    for (const auto& root : pop) {
      stack.push_back(root);
      while (!stack.empty()) {
        Particle<Dim> p = stack.back();
        stack.pop_back();
        for (;;) {
          if (p.next_branch_candidate >= s1) {
            brownian_advance(p, s1);
            if (field && !field->bounding_box().contains(p.position)) box_exit(p.position);
            record(p.position);
            next.push_back(p);
            break;
          }
          const double e = p.next_branch_candidate;
          brownian_advance(p, e);
          if (field && !field->bounding_box().contains(p.position)) box_exit(p.position);
          record(p.position);
          const double rate = (field && field->is_in_trap(p.position)) ? spec.beta_bar : beta;
          if (p.stream.uniform() * beta < rate) {
            if (out.total_born >= opt.cap) {
              // observations already completed keep their values
              out.censored = true;
              out.range_radius.assign(n_obs, NAN);
              double m = 0.0;
              for (std::size_t k = 0; k < n_obs && !std::isnan(out.N[k]); ++k)
                out.range_radius[k] = m = std::max(m, slice_max[k]);
              return out;
            }
            ++out.total_born;
            Particle<Dim> c = p;
            c.stream = p.stream.substream(kChildTag ^ p.stream.counter());
            c.birth_time = e;
            c.next_branch_candidate = e + c.stream.exponential(beta);
            stack.push_back(c);
          }
          p.next_branch_candidate = e + p.stream.exponential(beta);
        }
      }
    }
    if (opt.overflow == OverflowPolicy::thin && next.size() > opt.thin_target) {
      const double keep = static_cast<double>(opt.thin_target) / static_cast<double>(next.size());
      std::size_t w = 0;
      for (auto& p : next) {
        if (p.stream.substream(kRouletteTag + slice).uniform() < keep) {
          p.weight /= keep;
          next[w++] = p;
        }
      }
      next.resize(w);
      out.thinned = true;
    }
    pop.swap(next);
    if (obs_k < n_obs && out.times[obs_k] == s1) {
      double total = 0.0;
      for (const auto& p : pop) total += p.weight;
      out.N[obs_k] = total;
    }
  }
  out.range_radius.resize(n_obs);
  double m = 0.0;
  for (std::size_t k = 0; k < n_obs; ++k) out.range_radius[k] = m = std::max(m, slice_max[k]);
  return out;
}

}  // namespace detail

/// Free BBM: Exp(beta) branching clocks, Brownian motion between events.
/// N_t is recorded at each observation time; the range radius M_t is the
/// maximum |x| over recorded vertices (branch and observation points).
inline GrowthOutcome run_free_bbm(const RngStream& stream, int dim, double beta, double t_end,
                                  std::vector<double> observation_times, std::uint64_t cap = kDefaultCap) {
  GrowthOptions opt;
  opt.observation_times = std::move(observation_times);
  opt.cap = cap;
  const ObstacleBranchSpec spec{beta, beta, nullptr};
  return dispatch_dim(dim, [&]<int D>() { return detail::run_growth<D>(stream, spec, t_end, opt); });
}

/// BBM with branching rate beta outside the trap set and beta_bar inside, by
/// thinning: candidates at rate beta, each accepted with probability
/// beta(x)/beta at the particle's exact position.
inline GrowthOutcome run_obstacle_bbm(const RngStream& stream, int dim, const ObstacleBranchSpec& spec,
                                      double t_end, GrowthOptions opt) {
  return dispatch_dim(dim, [&]<int D>() { return detail::run_growth<D>(stream, spec, t_end, opt); });
}

// ---------------------------------------------------------------------------
// Confinement (fixed horizon): n_t(r) counts time-t particles whose whole
// ancestral path stayed in the open ball of radius r.

struct ConfinedOptions {
  SubstepMonitor monitor;
  std::uint64_t cap = kDefaultCap;
  int trace_slices = 16;
};

struct ConfinedOutcome {
  std::vector<double> r_grid;
  std::vector<std::uint64_t> n_profile;  // n_t(r) for each r in r_grid
  std::vector<double> trace_times;
  std::vector<std::uint64_t> trace_counts;  // unpruned particles (sup <= max r) at trace times
  bool censored = false;
  std::uint64_t total_born = 1;
};

namespace detail {

template <int Dim>
ConfinedOutcome run_confined(const RngStream& stream, double beta, double t_end, std::vector<double> r_grid,
                             const ConfinedOptions& opt) {
  if (!(beta > 0.0)) throw ParameterError("confined: beta must be positive");
  if (!(t_end > 0.0)) throw ParameterError("confined: t_end must be positive");
  if (r_grid.empty()) throw ParameterError("confined: empty radius grid");
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (!(r_grid[i] > 0.0)) throw ParameterError("confined: radii must be positive");
    if (i > 0 && r_grid[i] < r_grid[i - 1]) throw ParameterError("confined: radius grid must be sorted ascending");
  }
  if (opt.trace_slices < 1) throw ParameterError("confined: trace_slices must be >= 1");
  opt.monitor.validate();
  check_cap(opt.cap);
  const double r_max = r_grid.back();

  ConfinedOutcome out;
  out.r_grid = std::move(r_grid);
  out.n_profile.assign(out.r_grid.size(), 0);
  std::vector<Particle<Dim>> pop{founder<Dim>(stream, beta)};
  std::vector<Particle<Dim>> next;
  std::vector<Particle<Dim>> stack;
  for (int slice = 1; slice <= opt.trace_slices; ++slice) {
    const double s1 = slice == opt.trace_slices ? t_end : t_end * slice / opt.trace_slices;
    next.clear();
    for (const auto& root : pop) {
      stack.push_back(root);
      while (!stack.empty()) {
        Particle<Dim> p = stack.back();
        stack.pop_back();
        const double e = std::min(p.next_branch_candidate, s1);
        p.ancestral_sup_norm = std::max(
            p.ancestral_sup_norm, advance_monitored<Dim>(p.position, p.time, e, p.stream, opt.monitor, r_max));
        p.time = e;
        if (p.ancestral_sup_norm > r_max) continue;
        if (p.next_branch_candidate >= s1) {
          next.push_back(p);
          continue;
        }
        if (out.total_born >= opt.cap) {
          out.censored = true;
          return out;
        }
        ++out.total_born;
        for (std::uint64_t k = 0; k < 2; ++k) {
          Particle<Dim> c = p;
          c.stream = p.stream.substream(kChildTag + k);
          c.birth_time = e;
          c.next_branch_candidate = e + c.stream.exponential(beta);
          stack.push_back(c);
        }
      }
    }
    pop.swap(next);
    out.trace_times.push_back(s1);
    out.trace_counts.push_back(pop.size());
  }
  for (const auto& p : pop) {
    const auto first = std::lower_bound(out.r_grid.begin(), out.r_grid.end(), p.ancestral_sup_norm);
    for (auto k = static_cast<std::size_t>(first - out.r_grid.begin()); k < out.r_grid.size(); ++k) ++out.n_profile[k];
  }
  return out;
}

}  // namespace detail

/// n_t(r) for every r in a sorted grid, from one replica: the number of time-t
/// particles whose ancestral sup-norm is <= r. Monotone in r.
inline ConfinedOutcome confined_mass_profile(const RngStream& stream, int dim, double beta, double t_end,
                                             std::vector<double> r_grid, const ConfinedOptions& opt = {}) {
  return dispatch_dim(dim, [&]<int D>() { return detail::run_confined<D>(stream, beta, t_end, r_grid, opt); });
}

/// n_t at r = radius_fn(t_end), with particles pruned once their ancestral
/// sup-norm exceeds that radius.
inline ConfinedOutcome run_confined_bbm(const RngStream& stream, int dim, double beta, const RadiusFunction& radius_fn,
                                        double t_end, const ConfinedOptions& opt = {}) {
  return confined_mass_profile(stream, dim, beta, t_end, {radius_fn(t_end)}, opt);
}

// ---------------------------------------------------------------------------
// Confined mass for large-deviation estimates

enum class ConfinementMonitor {
  exact_interval,  // d = 1: exact Brownian-bridge killing on (-r, r)
  substep,         // any d: radial bridge correction on a substep grid
};

struct LDOptions {
  ConfinementMonitor monitor = ConfinementMonitor::exact_interval;
  SubstepMonitor substep;
  std::uint64_t cap = kDefaultCap;
  // exact_interval: once this many confined particles are alive at a slice
  // end, n_t is replaced by its conditional mean given that slice (0: never).
  std::uint64_t switch_population = 512;
  double slice = 0.25;
};

struct LDOutcome {
  double n_t = 0.0;
  double log_n_t = 0.0;
  bool extinct = false;
  bool projected = false;
  bool censored = false;  // confined population exceeded the cap (substep monitor)
  std::uint64_t total_born = 1;
};

namespace detail {

template <int Dim, bool Exact>
LDOutcome run_ld(const RngStream& stream, double beta, double t, double r, const LDOptions& opt) {
  if (!(beta > 0.0) || !(t > 0.0) || !(r > 0.0)) throw ParameterError("confined LD: beta, t and r must be positive");
  if (!(opt.slice > 0.0)) throw ParameterError("confined LD: slice must be positive");
  check_cap(opt.cap);
  if constexpr (!Exact) opt.substep.validate();

  LDOutcome out;
  std::vector<Particle<Dim>> pop{founder<Dim>(stream, beta)};
  std::vector<Particle<Dim>> next;
  std::vector<Particle<Dim>> stack;
  const auto n_slices = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(t / opt.slice - 1e-9)));
  for (std::int64_t slice = 1; slice <= n_slices; ++slice) {
    const double s1 = slice == n_slices ? t : opt.slice * static_cast<double>(slice);
    next.clear();
    for (const auto& root : pop) {
      stack.push_back(root);
      while (!stack.empty()) {
        Particle<Dim> p = stack.back();
        stack.pop_back();
        const double e = std::min(p.next_branch_candidate, s1);
        if constexpr (Exact) {
          const double x = p.position[0];
          const double dt = e - p.time;
          brownian_advance(p, e);
          if (dt > 0.0 && !(p.stream.uniform() < interval_bridge_stay_probability(x, p.position[0], r, dt))) continue;
        } else {
          p.ancestral_sup_norm =
              std::max(p.ancestral_sup_norm, advance_monitored<Dim>(p.position, p.time, e, p.stream, opt.substep, r));
          p.time = e;
          if (p.ancestral_sup_norm > r) continue;
        }
        if (p.next_branch_candidate >= s1) {
          next.push_back(p);
          continue;
        }
        ++out.total_born;
        for (std::uint64_t k = 0; k < 2; ++k) {
          Particle<Dim> c = p;
          c.stream = p.stream.substream(kChildTag + k);
          c.birth_time = e;
          c.next_branch_candidate = e + c.stream.exponential(beta);
          stack.push_back(c);
        }
      }
      // a single subtree can outgrow the cap within one slice
      if (next.size() > opt.cap) break;
    }
    pop.swap(next);
    if (pop.empty()) {
      out.extinct = true;
      out.n_t = 0.0;
      out.log_n_t = -std::numeric_limits<double>::infinity();
      return out;
    }
    if (pop.size() > opt.cap) {
      out.censored = true;
      out.n_t = NAN;
      out.log_n_t = NAN;
      return out;
    }
    if (Exact && s1 < t && opt.switch_population > 0 && pop.size() >= opt.switch_population) {
      // E[n_t | slice] = e^{beta tau} sum_i P_{x_i}(stay in (-r, r) for tau)
      const double tau = t - s1;
      std::vector<double> logs;
      logs.reserve(pop.size());
      for (const auto& p : pop) logs.push_back(interval_log_survival(p.position[0], r, tau));
      const double top = *std::max_element(logs.begin(), logs.end());
      double sum = 0.0;
      for (double l : logs) sum += std::exp(l - top);
      out.projected = true;
      out.log_n_t = top + std::log(sum) + beta * tau;
      out.n_t = std::exp(out.log_n_t);
      return out;
    }
  }
  out.n_t = static_cast<double>(pop.size());
  out.log_n_t = std::log(out.n_t);
  return out;
}

}  // namespace detail

/// Confined mass n_t at a fixed radius r for a single horizon t. With the
/// exact_interval monitor (d = 1 only) the run may stop early and report the
/// conditional mean of n_t instead (`projected`).
inline LDOutcome run_confined_ld(const RngStream& stream, int dim, double beta, double t, double r,
                                 const LDOptions& opt = {}) {
  if (opt.monitor == ConfinementMonitor::exact_interval) {
    if (dim != 1) throw ParameterError("exact_interval monitor needs dim = 1");
    return detail::run_ld<1, true>(stream, beta, t, r, opt);
  }
  return dispatch_dim(dim, [&]<int D>() { return detail::run_ld<D, false>(stream, beta, t, r, opt); });
}

}  // namespace bbmlab
