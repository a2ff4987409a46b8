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

// Replication harness. Replica i of an experiment uses RngStream(seed, i) and
// nothing else that varies between runs, so its output rows are a pure
// function of (config, i). Workers only decide when a replica runs; rows are
// written in replica order. Estimates are computed from the written rows, so
// a resumed run reproduces them exactly.
//
// Outcome CSV columns per mode:
//   free           replica_id,env_seed,t,N_t,range_radius,censored
//   obstacle       replica_id,env_seed,t,N_t,log_N_t,range_radius,thinned,censored
//   confined       replica_id,env_seed,t,r,n_t,log_n_t,extinct,projected,censored,
//                  event[kappa=K]... (one per ld.kappas), n_t[r=R]... (one per ld.profile_radii)
//   clearing_scan  replica_id,env_seed,cube,center_1..center_d,radius,target_radius,contains
//   clearing_hit   replica_id,env_seed,t,radius,hit,hit_time
// Each file starts with "# bbmlab-outcomes v1 mode=<mode> config_hash=<hash>".
// estimates.csv has columns estimand,point,ci_low,ci_high,replicas_used,censored,note.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "bbmlab/engine.hpp"
#include "bbmlab/environment.hpp"
#include "bbmlab/errors.hpp"
#include "bbmlab/experiments/config.hpp"
#include "bbmlab/experiments/estimators.hpp"
#include "bbmlab/numfmt.hpp"
#include "bbmlab/stats.hpp"
#include "bbmlab/theory.hpp"

namespace bbmlab {

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Small file helpers

/// Writes `content` to `path` through a temporary file and a rename, so the
/// file is either the old or the new version, never a partial one.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline std::string flag(bool b) { return b ? "1" : "0"; }

inline std::string join(const std::vector<std::string>& fields) {
  std::string s;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) s += ',';
    s += fields[i];
  }
  return s;
}

inline constexpr std::uint64_t kEnvironmentStream = 0xE5E5;
inline constexpr std::uint64_t kMarksStream = 0xE5E6;

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiment context: everything derived from the config that replicas share.

struct HorizonSpec {
  double t;
  double r;
  double log_p;           // log confinement probability at (r, t)
  bool p_asymptotic;      // log_p is the leading-order value (d >= 2)
  std::vector<double> log_threshold;  // per kappa: log(p_t e^{beta t} e^{-kappa r})
};

class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)), hash_(config_hash(cfg_)) {
    validate(cfg_);
    if (cfg_.mode == Mode::confined) {
      const auto rf = cfg_.radius_function();
      for (double t : cfg_.ld_horizons()) {
        HorizonSpec h{t, rf(t), 0.0, cfg_.dim != 1, {}};
        h.log_p = cfg_.dim == 1 ? interval_log_survival(0.0, h.r, t) : -theory::lambda_d(cfg_.dim) * t / (h.r * h.r);
        for (double k : cfg_.kappas) h.log_threshold.push_back(h.log_p + cfg_.beta * t - k * h.r);
        horizons_.push_back(h);
      }
    }
    if (cfg_.mode == Mode::obstacle || cfg_.mode == Mode::clearing_hit) field_ = std::make_shared<TrapField>(environment());
  }

  [[nodiscard]] const ExperimentConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const std::string& hash() const noexcept { return hash_; }
  [[nodiscard]] const std::vector<HorizonSpec>& horizons() const noexcept { return horizons_; }
  [[nodiscard]] const TrapField* field() const noexcept { return field_.get(); }

  /// The quenched environment: loaded from environment.file, or PPP(nu_base)
  /// on the config box thinned down to nu (nested fields across nu).
  [[nodiscard]] TrapField environment() const {
    if (!cfg_.env_file.empty()) {
      std::ifstream in(cfg_.env_file);
      if (!in) throw ConfigError("environment.file", "cannot open '" + cfg_.env_file + "'");
      TrapField f = read_environment(in);
      if (f.dim() != cfg_.dim) throw ConfigError("environment.file", "dimension differs from model.dim");
      return f;
    }
    const Box box = Box::cube(cfg_.dim, cfg_.box_half_width);
    const double base = cfg_.nu_base.value_or(cfg_.nu);
    TrapField f = build_trap_field(RngStream(cfg_.env_seed, detail::kEnvironmentStream), cfg_.dim, base,
                                   cfg_.trap_radius, box);
    if (base > cfg_.nu) f = thin_trap_field(f, cfg_.nu / base, RngStream(cfg_.env_seed, detail::kMarksStream));
    return f;
  }

  [[nodiscard]] std::string header_comment() const {
    return std::string("# bbmlab-outcomes v1 mode=") + to_string(cfg_.mode) + " config_hash=" + hash_;
  }

  [[nodiscard]] std::vector<std::string> columns() const {
    switch (cfg_.mode) {
      case Mode::free: return {"replica_id", "env_seed", "t", "N_t", "range_radius", "censored"};
      case Mode::obstacle:
        return {"replica_id", "env_seed", "t", "N_t", "log_N_t", "range_radius", "thinned", "censored"};
      case Mode::confined: {
        std::vector<std::string> c{"replica_id", "env_seed", "t",         "r",       "n_t",
                                   "log_n_t",    "extinct",  "projected", "censored"};
        for (double k : cfg_.kappas) c.push_back("event[kappa=" + format_double(k) + "]");
        for (double r : cfg_.profile_radii) c.push_back("n_t[r=" + format_double(r) + "]");
        return c;
      }
      case Mode::clearing_scan: {
        std::vector<std::string> c{"replica_id", "env_seed", "cube"};
        for (int i = 1; i <= cfg_.dim; ++i) c.push_back("center_" + std::to_string(i));
        c.insert(c.end(), {"radius", "target_radius", "contains"});
        return c;
      }
      case Mode::clearing_hit: return {"replica_id", "env_seed", "t", "radius", "hit", "hit_time"};
      case Mode::theory: break;
    }
    return {};
  }

  /// Output rows of replica i.
  [[nodiscard]] std::vector<std::string> run_replica(std::uint64_t i) const {
    switch (cfg_.mode) {
      case Mode::free: return free_rows(i);
      case Mode::obstacle: return obstacle_rows(i);
      case Mode::confined: return confined_rows(i);
      case Mode::clearing_scan: return clearing_scan_rows(i);
      case Mode::clearing_hit: return clearing_hit_rows(i);
      case Mode::theory: break;
    }
    throw ConfigError("mode", "theory mode has no replicas");
  }

  /// Target clearing radius for clearing_scan.
  [[nodiscard]] double scan_target_radius() const {
    return cfg_.rho ? *cfg_.rho : clearing_scale(cfg_.dim, cfg_.nu, cfg_.ell).R_ell;
  }

  [[nodiscard]] std::uint64_t scan_cube_count() const {
    return static_cast<std::uint64_t>(std::ceil(std::pow(cfg_.ell, cfg_.lattice_power) - 1e-9));
  }

  [[nodiscard]] double hit_radius() const {
    return cfg_.clearing_radius ? *cfg_.clearing_radius : theory::good_point_radius(cfg_.dim, cfg_.nu, cfg_.t_end);
  }

 private:
  [[nodiscard]] std::string id_prefix(std::uint64_t i) const {
    return std::to_string(i) + "," + std::to_string(cfg_.env_seed);
  }

  [[nodiscard]] std::vector<std::string> free_rows(std::uint64_t i) const {
    const auto o = run_free_bbm(RngStream(cfg_.seed, i), cfg_.dim, cfg_.beta, cfg_.t_end, cfg_.observation_times(),
                                cfg_.cap);
    std::vector<std::string> rows;
    for (std::size_t k = 0; k < o.times.size(); ++k)
      rows.push_back(id_prefix(i) + "," + format_double(o.times[k]) + "," + format_double(o.N[k]) + "," +
                     format_double(o.range_radius[k]) + "," + detail::flag(o.censored));
    return rows;
  }

  [[nodiscard]] std::vector<std::string> obstacle_rows(std::uint64_t i) const {
    GrowthOptions opt;
    opt.observation_times = cfg_.observation_times();
    opt.cap = cfg_.cap;
    opt.overflow = cfg_.overflow;
    opt.thin_target = cfg_.thin_target;
    const ObstacleBranchSpec spec{cfg_.beta, cfg_.beta_bar, field_.get()};
    const auto o = run_obstacle_bbm(RngStream(cfg_.seed, i), cfg_.dim, spec, cfg_.t_end, opt);
    std::vector<std::string> rows;
    for (std::size_t k = 0; k < o.times.size(); ++k)
      rows.push_back(id_prefix(i) + "," + format_double(o.times[k]) + "," + format_double(o.N[k]) + "," +
                     format_double(std::log(o.N[k])) + "," + format_double(o.range_radius[k]) + "," +
                     detail::flag(o.thinned) + "," + detail::flag(o.censored));
    return rows;
  }

  [[nodiscard]] std::vector<std::string> confined_rows(std::uint64_t i) const {
    std::vector<std::string> rows;
    const RngStream root(cfg_.seed, i);
    for (std::size_t h = 0; h < horizons_.size(); ++h) {
      const HorizonSpec& hs = horizons_[h];
      const RngStream stream = root.substream(h);
      LDOutcome o;
      std::vector<std::uint64_t> profile;
      if (cfg_.profile_radii.empty()) {
        LDOptions opt;
        opt.monitor = cfg_.monitor;
        opt.substep = {cfg_.step, cfg_.refine};
        opt.cap = cfg_.cap;
        opt.switch_population = cfg_.switch_population;
        opt.slice = cfg_.slice;
        o = run_confined_ld(stream, cfg_.dim, cfg_.beta, hs.t, hs.r, opt);
      } else {
        std::vector<double> grid = cfg_.profile_radii;
        grid.push_back(hs.r);
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        ConfinedOptions opt;
        opt.monitor = {cfg_.step, cfg_.refine};
        opt.cap = cfg_.cap;
        opt.trace_slices = cfg_.trace_slices;
        const auto c = confined_mass_profile(stream, cfg_.dim, cfg_.beta, hs.t, grid, opt);
        auto at = [&](double r) {
          return c.n_profile[static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), r) - grid.begin())];
        };
        o.censored = c.censored;
        o.total_born = c.total_born;
        if (c.censored) {
          o.n_t = o.log_n_t = NAN;
        } else {
          o.n_t = static_cast<double>(at(hs.r));
          o.log_n_t = std::log(o.n_t);
          o.extinct = o.n_t == 0.0;
          for (double r : cfg_.profile_radii) profile.push_back(at(r));
        }
      }
      std::string row = id_prefix(i) + "," + format_double(hs.t) + "," + format_double(hs.r) + "," +
                        format_double(o.n_t) + "," + format_double(o.log_n_t) + "," + detail::flag(o.extinct) + "," +
                        detail::flag(o.projected) + "," + detail::flag(o.censored);
      // a censored replica counts as "event did not occur"
      for (double thr : hs.log_threshold) row += "," + detail::flag(!o.censored && o.log_n_t < thr);
      for (std::size_t k = 0; k < cfg_.profile_radii.size(); ++k)
        row += "," + (o.censored ? std::string("nan") : std::to_string(profile[k]));
      rows.push_back(std::move(row));
    }
    return rows;
  }

  // Cube centres of the clearing scan: a lattice of spacing 2 ell, filled in
  // row-major order.
  [[nodiscard]] std::vector<double> cube_center(std::uint64_t cube) const {
    const auto m = scan_cube_count();
    auto per_axis = static_cast<std::uint64_t>(std::ceil(std::pow(static_cast<double>(m), 1.0 / cfg_.dim) - 1e-9));
    per_axis = std::max<std::uint64_t>(per_axis, 1);
    std::vector<double> c(static_cast<std::size_t>(cfg_.dim));
    for (int k = 0; k < cfg_.dim; ++k) {
      c[k] = 2.0 * cfg_.ell * static_cast<double>(cube % per_axis);
      cube /= per_axis;
    }
    return c;
  }

  // Each replica is a fresh environment; cubes are realized independently,
  // which matches the joint law on disjoint cubes up to the a-padding.
  [[nodiscard]] std::vector<std::string> clearing_scan_rows(std::uint64_t i) const {
    const RngStream env(cfg_.env_seed, i);
    const double target = scan_target_radius();
    std::vector<std::string> rows;
    const auto m = scan_cube_count();
    for (std::uint64_t cube = 0; cube < m; ++cube) {
      const auto centre = cube_center(cube);
      Box box{centre, centre};
      for (int k = 0; k < cfg_.dim; ++k) {
        box.lo[k] -= cfg_.ell;
        box.hi[k] += cfg_.ell;
      }
      const TrapField f = build_trap_field(env.substream(cube), cfg_.dim, cfg_.nu, cfg_.trap_radius, box);
      const auto rep = largest_clearing(f, box, cfg_.resolution, cfg_.inscribed);
      std::string row = id_prefix(i) + "," + std::to_string(cube);
      for (double v : rep.center) row += "," + format_double(v);
      row += "," + format_double(rep.radius) + "," + format_double(target) + "," + detail::flag(rep.radius >= target);
      rows.push_back(std::move(row));
    }
    return rows;
  }

  [[nodiscard]] std::vector<std::string> clearing_hit_rows(std::uint64_t i) const {
    RngStream s(cfg_.seed, i);
    const double radius = hit_radius();
    const double need = radius + field_->trap_radius();
    std::vector<double> x(static_cast<std::size_t>(cfg_.dim), 0.0);
    std::vector<double> z(x.size());
    double t = 0.0;
    double hit_time = NAN;
    const auto n_steps = static_cast<std::uint64_t>(std::ceil(cfg_.t_end / cfg_.step - 1e-9));
    for (std::uint64_t k = 0;; ++k) {
      if (!field_->bounding_box().contains(x)) {
        double reached = 0.0;
        for (double v : x) reached = std::max(reached, std::fabs(v));
        throw EnvironmentTooSmall(reached, std::ceil(std::max(reached, 6.0 * std::sqrt(cfg_.t_end) + need)));
      }
      if (field_->nearest_atom_distance(x) >= need) {
        hit_time = t;
        break;
      }
      if (k == n_steps) break;
      const double next = k + 1 == n_steps ? cfg_.t_end : cfg_.step * static_cast<double>(k + 1);
      s.normals(z, next - t);
      for (std::size_t d = 0; d < x.size(); ++d) x[d] += z[d];
      t = next;
    }
    return {id_prefix(i) + "," + format_double(cfg_.t_end) + "," + format_double(radius) + "," +
            detail::flag(!std::isnan(hit_time)) + "," + format_double(hit_time)};
  }

  ExperimentConfig cfg_;
  std::string hash_;
  std::vector<HorizonSpec> horizons_;
  std::shared_ptr<const TrapField> field_;
};

// ---------------------------------------------------------------------------
// Estimates

struct EstimateRow {
  std::string estimand;
  double point;
  double ci_low;
  double ci_high;
  std::uint64_t replicas_used;
  std::uint64_t censored;
  std::string note;
};

namespace detail {

// Outcome rows split into fields, grouped by a key column.
struct Table {
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] double num(std::size_t r, std::size_t c) const { return parse_double(rows[r][c]); }
  [[nodiscard]] bool yes(std::size_t r, std::size_t c) const { return rows[r][c] == "1"; }
};

inline Table split_rows(const std::vector<std::string>& lines) {
  Table t;
  for (const auto& l : lines) {
    std::vector<std::string> f;
    for (auto v : split(l, ',')) f.emplace_back(v);
    t.rows.push_back(std::move(f));
  }
  return t;
}

inline EstimateRow proportion_row(std::string name, std::uint64_t k, std::uint64_t n, std::uint64_t censored,
                                  std::string note = "") {
  if (n == 0) return {std::move(name), NAN, NAN, NAN, 0, censored, "no uncensored replicas"};
  const auto w = stats::wilson(k, n);
  return {std::move(name), w.point, w.lo, w.hi, n, censored, std::move(note)};
}

inline EstimateRow mean_row(std::string name, const std::vector<double>& xs, std::uint64_t censored,
                            std::string note = "") {
  if (xs.empty()) return {std::move(name), NAN, NAN, NAN, 0, censored, "no uncensored replicas"};
  const auto m = stats::mean_ci(xs);
  return {std::move(name), m.mean, m.lo, m.hi, xs.size(), censored, std::move(note)};
}

inline EstimateRow value_row(std::string name, double v, std::string note = "") {
  return {std::move(name), v, v, v, 0, 0, std::move(note)};
}

inline std::string tag(const char* key, double v) { return std::string("[") + key + "=" + format_double(v) + "]"; }

// Rows whose column `col` equals `value`, in file order.
inline std::vector<std::size_t> where(const Table& t, std::size_t col, const std::string& value) {
  std::vector<std::size_t> idx;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    if (t.rows[r][col] == value) idx.push_back(r);
  return idx;
}

inline std::vector<EstimateRow> free_estimates(const ExperimentConfig& c, const Table& t) {
  std::vector<EstimateRow> out;
  for (double time : c.observation_times()) {
    const auto idx = where(t, 2, format_double(time));
    std::vector<double> n;
    std::vector<double> m;
    std::uint64_t cens = 0;
    std::uint64_t ones = 0;
    std::vector<std::uint64_t> bins(20, 0);  // k = 1..19, then k >= 20
    for (auto r : idx) {
      if (t.yes(r, 5) || std::isnan(t.num(r, 3))) {
        ++cens;
        continue;
      }
      const double v = t.num(r, 3);
      n.push_back(v);
      m.push_back(t.num(r, 4));
      ones += v == 1.0;
      ++bins[static_cast<std::size_t>(std::min(v, 20.0)) - 1];
    }
    const std::string tg = tag("t", time);
    out.push_back(proportion_row("P(N=1)" + tg, ones, n.size(), cens,
                                 "yule=" + format_double(theory::yule_pmf(c.beta, time, 1))));
    out.push_back(mean_row("mean N" + tg, n, cens, "expected=" + format_double(std::exp(c.beta * time))));
    out.push_back(mean_row("mean range_radius" + tg, m, cens));
    if (!n.empty()) {
      std::vector<double> probs;
      for (std::int64_t k = 1; k <= 19; ++k) probs.push_back(theory::yule_pmf(c.beta, time, k));
      probs.push_back(theory::yule_tail(c.beta, time, 19));
      const auto gof = stats::chi_square_gof(bins, probs);
      out.push_back({"yule_gof_pvalue" + tg, gof.p_value, gof.p_value, gof.p_value, n.size(), cens,
                     "chi2=" + format_double(gof.statistic) + " df=" + format_double(gof.df)});
    }
  }
  return out;
}

inline std::vector<EstimateRow> obstacle_estimates(const ExperimentConfig& c, const Table& t) {
  std::vector<EstimateRow> out;
  for (double time : c.observation_times()) {
    const auto idx = where(t, 2, format_double(time));
    std::vector<double> n;
    std::vector<double> g;
    std::vector<double> resc;
    std::uint64_t cens = 0;
    bool thinned = false;
    for (auto r : idx) {
      if (t.yes(r, 7)) {
        ++cens;
        continue;
      }
      thinned = thinned || t.yes(r, 6);
      n.push_back(t.num(r, 3));
      g.push_back(t.num(r, 4) / time);
      if (time > 1.0) resc.push_back(std::pow(std::log(time), 2.0 / c.dim) * (g.back() - c.beta));
    }
    const std::string tg = tag("t", time);
    const std::string note = thinned ? "weighted estimate (thinned)" : "";
    out.push_back(mean_row("mean N" + tg, n, cens, note));
    out.push_back(mean_row("mean log(N)/t" + tg, g, cens, note));
    if (time > 1.0) out.push_back(mean_row("mean rescaled growth" + tg, resc, cens, "(log t)^(2/d) (log(N)/t - beta)"));
    if (time > std::numbers::e && c.nu > 0.0) {
      const auto p = theory::quenched_growth_exponent(c.dim, c.nu, c.beta, time);
      out.push_back(value_row("predicted log(N)/t" + tg, p.exponent, "asymptotic; limit of rescaled growth = " +
                                                                      format_double(p.limit)));
    }
  }
  return out;
}

inline std::vector<EstimateRow> confined_estimates(const ExperimentConfig& c, const std::vector<HorizonSpec>& hs,
                                                   const Table& t) {
  std::vector<EstimateRow> out;
  std::vector<std::vector<HorizonEvents>> ladder(c.kappas.size());
  for (const auto& h : hs) {
    const auto idx = where(t, 2, format_double(h.t));
    std::vector<double> n;
    std::vector<std::vector<double>> prof(c.profile_radii.size());
    std::uint64_t cens = 0;
    std::uint64_t extinct = 0;
    std::uint64_t projected = 0;
    std::vector<std::uint64_t> events(c.kappas.size(), 0);
    for (auto r : idx) {
      for (std::size_t k = 0; k < c.kappas.size(); ++k) events[k] += t.yes(r, 9 + k);
      if (t.yes(r, 8)) {
        ++cens;
        continue;
      }
      n.push_back(t.num(r, 4));
      extinct += t.yes(r, 6);
      projected += t.yes(r, 7);
      for (std::size_t k = 0; k < c.profile_radii.size(); ++k) prof[k].push_back(t.num(r, 9 + c.kappas.size() + k));
    }
    const std::string tg = tag("t", h.t);
    const std::string threshold = h.p_asymptotic ? "threshold=asymptotic" : "threshold=series";
    out.push_back(mean_row("mean n_t" + tg + tag("r", h.r), n, cens,
                           "expected=" + format_double(std::exp(h.log_p + c.beta * h.t)) + " projected=" +
                               std::to_string(projected)));
    out.push_back(proportion_row("P(n_t=0)" + tg, extinct, n.size(), cens,
                                 "extinction bound=" +
                                     format_double(std::exp(-theory::extinction_rate_lower_bound(c.beta).rate * h.r))));
    for (std::size_t k = 0; k < c.kappas.size(); ++k) {
      const std::string kt = tg + tag("kappa", c.kappas[k]);
      const std::uint64_t trials = idx.size();
      out.push_back(proportion_row("P(E)" + kt, events[k], trials, cens, threshold + " censored_as_no_event"));
      const auto hr = horizon_rate({h.t, h.r, events[k], trials});
      out.push_back({"log P(E)/r" + kt, hr.point, hr.lo, hr.hi, trials, cens, hr.upper_only ? "upper_bound" : ""});
      ladder[k].push_back({h.t, h.r, events[k], trials});
    }
    for (std::size_t k = 0; k < c.profile_radii.size(); ++k)
      out.push_back(mean_row("mean n_t" + tg + tag("r", c.profile_radii[k]), prof[k], cens));
  }
  if (hs.size() >= 3) {
    for (std::size_t k = 0; k < c.kappas.size(); ++k) {
      const auto fit = estimate_ld_rate(ladder[k]);
      const auto pred = theory::ld_rate_prediction(c.kappas[k], c.beta);
      const std::string p = pred.regime == theory::RateRegime::exact
                                ? "prediction=" + format_double(pred.value)
                                : "prediction band=[" + format_double(pred.band_lo) + "," + format_double(pred.band_hi) + "]";
      out.push_back({"ld_rate" + tag("kappa", c.kappas[k]), fit.one_sided ? fit.hi : fit.slope, fit.lo, fit.hi,
                     fit.horizons_used, 0, (fit.one_sided ? "one_sided_upper_bound " : "") + p});
    }
  }
  return out;
}

inline std::vector<EstimateRow> clearing_scan_estimates(const ExperimentConfig& c, const Experiment& e, const Table& t) {
  std::uint64_t yes = 0;
  std::vector<double> radii;
  const std::size_t radius_col = 3 + static_cast<std::size_t>(c.dim);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    yes += t.yes(r, radius_col + 2);
    radii.push_back(t.num(r, radius_col));
  }
  std::vector<EstimateRow> out;
  out.push_back(proportion_row("P(contains clearing)", yes, t.rows.size(), 0,
                               "target radius=" + format_double(e.scan_target_radius())));
  out.push_back(mean_row("mean largest clearing radius", radii, 0));
  if (c.nu > 0.0) {
    const double rho = e.scan_target_radius();
    const double cells = std::pow(std::floor(c.ell / rho), c.dim);
    const double vol = theory::unit_ball_volume(c.dim) * std::pow(rho, c.dim);
    out.push_back(value_row("clearing existence lower bound", -std::expm1(-cells * std::exp(-c.nu * vol)),
                            "1 - exp(-floor(ell/rho)^d exp(-nu omega_d rho^d))"));
  }
  return out;
}

inline std::vector<EstimateRow> clearing_hit_estimates(const ExperimentConfig& c, const Table& t) {
  std::uint64_t hits = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) hits += t.yes(r, 4);
  std::vector<EstimateRow> out;
  out.push_back(proportion_row("P(hit)", hits, t.rows.size(), 0));
  out.push_back(proportion_row("P(miss)", t.rows.size() - hits, t.rows.size(), 0));
  out.push_back(value_row("miss bound", std::exp(-std::cbrt(c.t_end)), "exp(-t^(1/3))"));
  return out;
}

}  // namespace detail

inline std::vector<EstimateRow> compute_estimates(const Experiment& e, const std::vector<std::string>& rows) {
  const auto t = detail::split_rows(rows);
  const auto& c = e.config();
  switch (c.mode) {
    case Mode::free: return detail::free_estimates(c, t);
    case Mode::obstacle: return detail::obstacle_estimates(c, t);
    case Mode::confined: return detail::confined_estimates(c, e.horizons(), t);
    case Mode::clearing_scan: return detail::clearing_scan_estimates(c, e, t);
    case Mode::clearing_hit: return detail::clearing_hit_estimates(c, t);
    case Mode::theory: break;
  }
  return {};
}

inline std::string estimates_csv(const Experiment& e, const std::vector<EstimateRow>& rows) {
  std::string s = "# bbmlab-estimates v1 mode=" + std::string(to_string(e.config().mode)) + " config_hash=" + e.hash() +
                  "\nestimand,point,ci_low,ci_high,replicas_used,censored,note\n";
  auto quote = [](const std::string& v) {
    if (v.find_first_of(",\"") == std::string::npos) return v;
    std::string q = "\"";
    for (char ch : v) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  };
  for (const auto& r : rows)
    s += quote(r.estimand) + "," + format_double(r.point) + "," + format_double(r.ci_low) + "," +
         format_double(r.ci_high) + "," + std::to_string(r.replicas_used) + "," + std::to_string(r.censored) + "," +
         quote(r.note) + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Theory tables

struct TheoryQuery {
  int dim = 1;
  double nu = 1.0;
  double beta = 1.0;
  double kappa = 0.5;
  double t = 1.0;
  double r = 1.0;
  double k = 1.0;
  double ell = 50.0;
};

/// Every closed-form evaluator at one parameter point, as CSV with columns
/// quantity,value,asymptotic,note.
inline std::string theory_csv(const TheoryQuery& q) {
  std::string s = "quantity,value,asymptotic,note\n";
  auto row = [&](const std::string& name, double v, bool asym, const std::string& note = "") {
    s += name + "," + format_double(v) + "," + detail::flag(asym) + "," + note + "\n";
  };
  const auto c = theory::constants(q.dim, q.nu);
  row("lambda_d", c.lambda_d, false);
  row("omega_d", c.omega_d, false);
  row("R0", c.R0, false);
  row("c_d_nu", c.c_d_nu, false);
  const auto p = theory::confinement_probability_series(q.dim, q.r, q.t);
  row("confinement_probability", p.value, p.asymptotic, "r=" + format_double(q.r) + " t=" + format_double(q.t));
  const auto a = theory::displacement_tail(q.dim, q.k, q.t);
  row("displacement_tail", a.value, a.asymptotic, "k=" + format_double(q.k) + " t=" + format_double(q.t));
  row("yule_pmf_1", theory::yule_pmf(q.beta, q.t, 1), false, "beta=" + format_double(q.beta));
  row("yule_tail_1", theory::yule_tail(q.beta, q.t, 1), false);
  const auto ld = theory::ld_rate_prediction(q.kappa, q.beta);
  if (ld.regime == theory::RateRegime::exact) {
    row("ld_rate", ld.value, true, "exact regime kappa=" + format_double(q.kappa));
  } else {
    row("ld_rate_band_lo", ld.band_lo, true, "band regime kappa=" + format_double(q.kappa));
    row("ld_rate_band_hi", ld.band_hi, true, "band regime kappa=" + format_double(q.kappa));
  }
  const auto ext = theory::extinction_rate_lower_bound(q.beta);
  row("extinction_rate", ext.rate, true);
  row("extinction_time_scale", ext.time_scale, false);
  if (q.t > std::numbers::e) {
    const auto g = theory::quenched_growth_exponent(q.dim, q.nu, q.beta, q.t);
    row("quenched_growth_exponent", g.exponent, g.asymptotic);
    row("quenched_growth_limit", g.limit, false);
  }
  if (q.t > 1.0) row("good_point_radius", theory::good_point_radius(q.dim, q.nu, q.t), true);
  if (q.ell > std::numbers::e) {
    const auto cs = clearing_scale(q.dim, q.nu, q.ell);
    row("R_ell", cs.R_ell, true, cs.clamped ? "clamped at 0" : "");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
//   bbmlab-checkpoint v1 <config hash>
//   config <expanded config JSON on one line>
//   replica <id> <row count>
//   <rows...>

struct Checkpoint {
  std::string hash;
  nlohmann::json config;
  std::map<std::uint64_t, std::vector<std::string>> rows;
};

inline std::string checkpoint_text(const Experiment& e, const std::map<std::uint64_t, std::vector<std::string>>& done) {
  std::string s = "bbmlab-checkpoint v1 " + e.hash() + "\nconfig " + to_json(e.config()).dump() + "\n";
  for (const auto& [id, rows] : done) {
    s += "replica " + std::to_string(id) + " " + std::to_string(rows.size()) + "\n";
    for (const auto& r : rows) s += r + "\n";
  }
  return s;
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  Checkpoint ck;
  std::string line;
  if (!std::getline(in, line) || line.rfind("bbmlab-checkpoint v1 ", 0) != 0)
    throw std::runtime_error("'" + path.string() + "' is not a checkpoint file");
  ck.hash = line.substr(21);
  if (!std::getline(in, line) || line.rfind("config ", 0) != 0) throw std::runtime_error("checkpoint: missing config");
  ck.config = nlohmann::json::parse(line.substr(7));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ' ');
    if (f.size() != 3 || f[0] != "replica") throw std::runtime_error("checkpoint: bad record '" + line + "'");
    const auto id = parse_u64(f[1]);
    const auto n = parse_u64(f[2]);
    auto& rows = ck.rows[id];
    for (std::uint64_t k = 0; k < n; ++k) {
      if (!std::getline(in, line)) throw std::runtime_error("checkpoint: truncated");
      rows.push_back(line);
    }
  }
  return ck;
}

// ---------------------------------------------------------------------------
// Running

struct RunOptions {
  unsigned workers = 1;
  std::filesystem::path out_dir = "out";
  std::filesystem::path checkpoint;  // empty: no checkpointing
  std::optional<std::uint64_t> stop_after;  // run only replica ids below this, then stop
  std::uint64_t checkpoint_every = 0;       // replicas per checkpoint write; 0: about 20 writes per run
  const Checkpoint* resume_from = nullptr;
};

struct RunSummary {
  std::uint64_t completed = 0;
  bool interrupted = false;
  double wall_seconds = 0.0;
};

namespace detail {

// Runs `ids` on `workers` threads; rows land in `done`. The first exception
// thrown by any replica stops the batch and is rethrown.
inline void run_batch(const Experiment& e, const std::vector<std::uint64_t>& ids, unsigned workers,
                      std::map<std::uint64_t, std::vector<std::string>>& done) {
  std::vector<std::vector<std::string>> results(ids.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= ids.size() || failed.load()) return;
      try {
        results[k] = e.run_replica(ids[k]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(ids.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  for (std::size_t k = 0; k < ids.size(); ++k) done[ids[k]] = std::move(results[k]);
}

}  // namespace detail

/// Runs (or resumes) an experiment and writes outcomes.csv, estimates.csv,
/// run.json and, for environment modes, env.csv into out_dir. When
/// stop_after cuts the run short only the checkpoint is written.
inline RunSummary run_experiment(const Experiment& e, const RunOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const auto& cfg = e.config();
  RunSummary summary;

  if (cfg.mode == Mode::theory) {
    const auto h = cfg.ld_horizons();
    TheoryQuery q{cfg.dim, cfg.nu > 0.0 ? cfg.nu : 1.0, cfg.beta, cfg.kappas.empty() ? 0.5 : cfg.kappas.front(),
                  h.back(), cfg.radius_function()(h.back()), 1.0, cfg.ell};
    write_file_atomic(opt.out_dir / "theory.csv", theory_csv(q));
  } else {
    std::map<std::uint64_t, std::vector<std::string>> done;
    if (opt.resume_from) {
      if (opt.resume_from->hash != e.hash())
        throw ConfigHashMismatch("checkpoint config hash " + opt.resume_from->hash + " differs from " + e.hash());
      done = opt.resume_from->rows;
    }
    const std::uint64_t limit = opt.stop_after ? std::min(*opt.stop_after, cfg.replicas) : cfg.replicas;
    std::vector<std::uint64_t> todo;
    for (std::uint64_t i = 0; i < limit; ++i)
      if (!done.count(i)) todo.push_back(i);
    const std::uint64_t every =
        opt.checkpoint_every ? opt.checkpoint_every : std::max<std::uint64_t>(1, (cfg.replicas + 19) / 20);
    for (std::size_t pos = 0; pos < todo.size(); pos += every) {
      const std::size_t end = std::min<std::size_t>(todo.size(), pos + every);
      detail::run_batch(e, {todo.begin() + static_cast<std::ptrdiff_t>(pos), todo.begin() + static_cast<std::ptrdiff_t>(end)},
                        opt.workers, done);
      if (!opt.checkpoint.empty()) write_file_atomic(opt.checkpoint, checkpoint_text(e, done));
    }
    summary.completed = done.size();
    if (done.size() < cfg.replicas) {
      if (!opt.checkpoint.empty()) write_file_atomic(opt.checkpoint, checkpoint_text(e, done));
      summary.interrupted = true;
      summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      return summary;
    }
    std::vector<std::string> rows;
    for (const auto& [id, r] : done) rows.insert(rows.end(), r.begin(), r.end());
    std::string out = e.header_comment() + "\n" + detail::join(e.columns()) + "\n";
    for (const auto& r : rows) out += r + "\n";
    write_file_atomic(opt.out_dir / "outcomes.csv", out);
    write_file_atomic(opt.out_dir / "estimates.csv", estimates_csv(e, compute_estimates(e, rows)));
    if (e.field()) {
      std::ostringstream env;
      write_environment(env, *e.field());
      write_file_atomic(opt.out_dir / "env.csv", env.str());
    }
  }

  summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  nlohmann::json meta;
  meta["tool"] = "bbmlab";
  meta["version"] = kVersion;
  meta["mode"] = to_string(cfg.mode);
  meta["config_hash"] = e.hash();
  meta["config"] = to_json(cfg);
  meta["seed"] = cfg.seed;
  meta["env_seed"] = cfg.env_seed;
  meta["replicas"] = cfg.replicas;
  meta["workers"] = opt.workers;
  meta["resumed"] = opt.resume_from != nullptr;
  meta["wall_time_seconds"] = summary.wall_seconds;
  write_file_atomic(opt.out_dir / "run.json", meta.dump(2) + "\n");
  return summary;
}

}  // namespace bbmlab
