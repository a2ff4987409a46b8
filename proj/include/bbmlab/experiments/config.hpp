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

// Experiment configuration: a JSON document with the sections below. Every
// section and field is optional; omitted fields take the defaults shown in
// ExperimentConfig. Unknown fields are errors.
//
//   mode         free | confined | obstacle | clearing_scan | clearing_hit | theory
//   run          seed, replicas
//   model        dim, beta, beta_bar, t_end, times, cap, overflow, thin_target
//   monitor      kind (exact_interval | substep), step, refine
//   radius       form (power | log_power | constant), c, alpha
//   ld           horizons, kappas, switch_population, slice, profile_radii, trace_slices
//   environment  nu, nu_base, trap_radius, box_half_width, env_seed, file
//   clearing     ell, rho, resolution, lattice_power, inscribed, radius

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bbmlab/engine.hpp"
#include "bbmlab/errors.hpp"
#include "bbmlab/radius.hpp"

namespace bbmlab {

enum class Mode { free, confined, obstacle, clearing_scan, clearing_hit, theory };

struct ExperimentConfig {
  Mode mode = Mode::free;

  std::uint64_t seed = 1;
  std::uint64_t replicas = 1;

  int dim = 1;
  double beta = 1.0;
  double beta_bar = 0.0;
  double t_end = 1.0;
  std::vector<double> times;  // observation times; empty: {t_end}
  std::uint64_t cap = kDefaultCap;
  OverflowPolicy overflow = OverflowPolicy::censor;
  std::uint64_t thin_target = 1u << 14;

  ConfinementMonitor monitor = ConfinementMonitor::substep;
  double step = 1e-3;
  int refine = 0;

  RadiusFunction::Form radius_form = RadiusFunction::Form::constant;
  double radius_c = 1.0;
  double radius_alpha = 0.4;

  std::vector<double> horizons;  // empty: {t_end}
  std::vector<double> kappas;
  std::uint64_t switch_population = 512;
  double slice = 0.25;
  std::vector<double> profile_radii;
  int trace_slices = 16;

  double nu = 0.0;
  std::optional<double> nu_base;  // build at nu_base, then thin to nu
  double trap_radius = 0.5;
  double box_half_width = 10.0;
  std::uint64_t env_seed = 0;
  std::string env_file;

  double ell = 50.0;
  std::optional<double> rho;  // default: clearing_scale R_ell
  double resolution = 0.05;
  double lattice_power = 2.0;
  bool inscribed = true;
  std::optional<double> clearing_radius;  // default: good_point_radius(t_end)

  [[nodiscard]] RadiusFunction radius_function() const {
    switch (radius_form) {
      case RadiusFunction::Form::power: return RadiusFunction::power(radius_c, radius_alpha);
      case RadiusFunction::Form::log_power: return RadiusFunction::log_power(radius_c, dim);
      case RadiusFunction::Form::constant: return RadiusFunction::constant(radius_c);
    }
    return RadiusFunction::constant(radius_c);
  }

  [[nodiscard]] std::vector<double> observation_times() const { return times.empty() ? std::vector<double>{t_end} : times; }
  [[nodiscard]] std::vector<double> ld_horizons() const { return horizons.empty() ? std::vector<double>{t_end} : horizons; }
};

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::free: return "free";
    case Mode::confined: return "confined";
    case Mode::obstacle: return "obstacle";
    case Mode::clearing_scan: return "clearing_scan";
    case Mode::clearing_hit: return "clearing_hit";
    case Mode::theory: return "theory";
  }
  return "?";
}

namespace detail {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  [[nodiscard]] std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  void only(std::initializer_list<const char*> keys) const {
    for (const auto& [k, v] : j_.items()) {
      bool ok = false;
      for (const char* allowed : keys) ok = ok || k == allowed;
      if (!ok) throw ConfigError(field(k), "unknown field");
    }
  }

  void number(const std::string& key, double& out) const {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    out = v.get<double>();
  }

  void number(const std::string& key, std::optional<double>& out) const {
    if (!has(key)) return;
    double v = 0.0;
    number(key, v);
    out = v;
  }

  void integer(const std::string& key, std::uint64_t& out) const {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (v.is_number_unsigned()) {
      out = v.get<std::uint64_t>();
    } else if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
      out = static_cast<std::uint64_t>(v.get<std::int64_t>());
    } else if (v.is_number_float() && v.get<double>() >= 0.0 && v.get<double>() < 1.8e19 &&
               std::floor(v.get<double>()) == v.get<double>()) {
      out = static_cast<std::uint64_t>(v.get<double>());
    } else {
      throw ConfigError(field(key), "expected a non-negative integer");
    }
  }

  void integer(const std::string& key, int& out) const {
    std::uint64_t v = static_cast<std::uint64_t>(std::max(out, 0));
    if (has(key) && j_.at(key).is_number_integer() && j_.at(key).get<std::int64_t>() < 0)
      throw ConfigError(field(key), "expected a non-negative integer");
    integer(key, v);
    if (v > 1000000) throw ConfigError(field(key), "value too large");
    out = static_cast<int>(v);
  }

  void boolean(const std::string& key, bool& out) const {
    if (!has(key)) return;
    if (!j_.at(key).is_boolean()) throw ConfigError(field(key), "expected true or false");
    out = j_.at(key).get<bool>();
  }

  void text(const std::string& key, std::string& out) const {
    if (!has(key)) return;
    if (!j_.at(key).is_string()) throw ConfigError(field(key), "expected a string");
    out = j_.at(key).get<std::string>();
  }

  void numbers(const std::string& key, std::vector<double>& out) const {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array of numbers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
  }

  [[nodiscard]] std::optional<Reader> section(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return Reader(j_.at(key), field(key));
  }

 private:
  const json& j_;
  std::string path_;
};

template <class E>
E parse_enum(const std::string& path, const std::string& s, std::initializer_list<std::pair<const char*, E>> options) {
  std::string names;
  for (const auto& [name, value] : options) {
    if (s == name) return value;
    names += names.empty() ? name : std::string(" | ") + name;
  }
  throw ConfigError(path, "expected one of " + names + ", got '" + s + "'");
}

inline void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

inline void require_increasing(const std::vector<double>& xs, const std::string& path, double lo_exclusive) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(xs[i] > lo_exclusive && std::isfinite(xs[i]), path + "[" + std::to_string(i) + "]",
            "must be finite and > " + format_double(lo_exclusive));
    require(i == 0 || xs[i] > xs[i - 1], path + "[" + std::to_string(i) + "]", "must be strictly increasing");
  }
}

}  // namespace detail

/// Checks cross-field invariants; throws ConfigError naming the field.
inline void validate(const ExperimentConfig& c) {
  using detail::require;
  require(c.replicas >= 1, "run.replicas", "must be >= 1");
  require(c.dim >= 1 && c.dim <= kMaxDim, "model.dim", "must be in [1, 10]");
  require(c.beta > 0.0 && std::isfinite(c.beta), "model.beta", "must be positive");
  require(c.beta_bar >= 0.0 && c.beta_bar <= c.beta, "model.beta_bar", "must be in [0, beta]");
  require(c.t_end > 0.0 && std::isfinite(c.t_end), "model.t_end", "must be positive");
  detail::require_increasing(c.times, "model.times", 0.0);
  require(c.times.empty() || c.times.back() <= c.t_end, "model.times", "must not exceed t_end");
  require(c.cap >= 1, "model.cap", "must be >= 1");
  require(c.thin_target >= 2, "model.thin_target", "must be >= 2");
  require(c.step > 0.0, "monitor.step", "must be positive");
  require(c.refine >= 0 && c.refine <= 12, "monitor.refine", "must be in [0, 12]");
  require(c.radius_c > 0.0, "radius.c", "must be positive");
  if (c.radius_form == RadiusFunction::Form::power)
    require(c.radius_alpha > 0.0 && c.radius_alpha < 0.5, "radius.alpha", "power form needs 0 < alpha < 1/2");
  detail::require_increasing(c.horizons, "ld.horizons", c.radius_form == RadiusFunction::Form::log_power ? 1.0 : 0.0);
  for (std::size_t i = 0; i < c.kappas.size(); ++i)
    require(c.kappas[i] > 0.0, "ld.kappas[" + std::to_string(i) + "]", "must be positive");
  require(c.slice > 0.0, "ld.slice", "must be positive");
  detail::require_increasing(c.profile_radii, "ld.profile_radii", 0.0);
  require(c.trace_slices >= 1, "ld.trace_slices", "must be >= 1");
  require(c.nu >= 0.0 && std::isfinite(c.nu), "environment.nu", "must be >= 0");
  require(!c.nu_base || *c.nu_base >= c.nu, "environment.nu_base", "must be >= nu");
  require(c.trap_radius > 0.0, "environment.trap_radius", "must be positive");
  require(c.box_half_width >= c.trap_radius, "environment.box_half_width", "must be >= trap_radius");
  require(c.resolution > 0.0 && c.resolution <= 0.5 * c.trap_radius, "clearing.resolution",
          "must be in (0, trap_radius/2]");
  require(c.lattice_power >= 0.0, "clearing.lattice_power", "must be >= 0");
  require(!c.rho || *c.rho > 0.0, "clearing.rho", "must be positive");
  require(!c.clearing_radius || *c.clearing_radius >= 0.0, "clearing.radius", "must be >= 0");

  if (c.mode == Mode::confined) {
    if (c.monitor == ConfinementMonitor::exact_interval) {
      require(c.dim == 1, "monitor.kind", "exact_interval needs model.dim = 1");
      require(c.profile_radii.empty(), "ld.profile_radii", "profiles need the substep monitor");
    }
    for (double t : c.ld_horizons()) (void)c.radius_function()(t);
  }
  if (c.mode == Mode::obstacle && c.env_file.empty()) {
    const double need = std::sqrt(2.0 * c.beta) * c.t_end + 6.0 * std::sqrt(c.t_end);
    require(c.box_half_width >= need, "environment.box_half_width",
            "must be >= sqrt(2 beta) t_end + 6 sqrt(t_end) = " + format_double(need));
  }
  if (c.mode == Mode::clearing_scan) {
    require(c.rho || c.ell > std::numbers::e, "clearing.ell", "must exceed e when clearing.rho is unset");
    require(c.rho || c.nu > 0.0, "environment.nu", "must be positive when clearing.rho is unset");
    require(c.ell > 0.0, "clearing.ell", "must be positive");
    require(2.0 * c.ell >= 2.0 * c.trap_radius, "clearing.ell", "cube smaller than one trap diameter");
  }
  if (c.mode == Mode::clearing_hit) {
    require(c.clearing_radius || (c.nu > 0.0 && c.t_end > 1.0), "clearing.radius",
            "must be set unless nu > 0 and t_end > 1");
    require(2.0 * c.box_half_width >= 2.0 * c.trap_radius, "environment.box_half_width", "box smaller than one trap");
  }
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::parse_enum;
  ExperimentConfig c;
  detail::Reader root(j, "");
  root.only({"mode", "run", "model", "monitor", "radius", "ld", "environment", "clearing"});
  if (root.has("mode")) {
    std::string m;
    root.text("mode", m);
    c.mode = parse_enum<Mode>("mode", m,
                              {{"free", Mode::free},
                               {"confined", Mode::confined},
                               {"obstacle", Mode::obstacle},
                               {"clearing_scan", Mode::clearing_scan},
                               {"clearing_hit", Mode::clearing_hit},
                               {"theory", Mode::theory}});
  }
  if (auto s = root.section("run")) {
    s->only({"seed", "replicas"});
    s->integer("seed", c.seed);
    s->integer("replicas", c.replicas);
  }
  if (auto s = root.section("model")) {
    s->only({"dim", "beta", "beta_bar", "t_end", "times", "cap", "overflow", "thin_target"});
    s->integer("dim", c.dim);
    s->number("beta", c.beta);
    s->number("beta_bar", c.beta_bar);
    s->number("t_end", c.t_end);
    s->numbers("times", c.times);
    s->integer("cap", c.cap);
    std::string o;
    s->text("overflow", o);
    if (!o.empty())
      c.overflow = parse_enum<OverflowPolicy>(s->field("overflow"), o,
                                              {{"censor", OverflowPolicy::censor}, {"thin", OverflowPolicy::thin}});
    s->integer("thin_target", c.thin_target);
  }
  if (auto s = root.section("monitor")) {
    s->only({"kind", "step", "refine"});
    std::string k;
    s->text("kind", k);
    if (!k.empty())
      c.monitor = parse_enum<ConfinementMonitor>(
          s->field("kind"), k,
          {{"exact_interval", ConfinementMonitor::exact_interval}, {"substep", ConfinementMonitor::substep}});
    s->number("step", c.step);
    s->integer("refine", c.refine);
  }
  if (auto s = root.section("radius")) {
    s->only({"form", "c", "alpha"});
    std::string f;
    s->text("form", f);
    if (!f.empty())
      c.radius_form = parse_enum<RadiusFunction::Form>(s->field("form"), f,
                                                       {{"power", RadiusFunction::Form::power},
                                                        {"log_power", RadiusFunction::Form::log_power},
                                                        {"constant", RadiusFunction::Form::constant}});
    s->number("c", c.radius_c);
    s->number("alpha", c.radius_alpha);
  }
  if (auto s = root.section("ld")) {
    s->only({"horizons", "kappas", "switch_population", "slice", "profile_radii", "trace_slices"});
    s->numbers("horizons", c.horizons);
    s->numbers("kappas", c.kappas);
    s->integer("switch_population", c.switch_population);
    s->number("slice", c.slice);
    s->numbers("profile_radii", c.profile_radii);
    s->integer("trace_slices", c.trace_slices);
  }
  if (auto s = root.section("environment")) {
    s->only({"nu", "nu_base", "trap_radius", "box_half_width", "env_seed", "file"});
    s->number("nu", c.nu);
    s->number("nu_base", c.nu_base);
    s->number("trap_radius", c.trap_radius);
    s->number("box_half_width", c.box_half_width);
    s->integer("env_seed", c.env_seed);
    s->text("file", c.env_file);
  }
  if (auto s = root.section("clearing")) {
    s->only({"ell", "rho", "resolution", "lattice_power", "inscribed", "radius"});
    s->number("ell", c.ell);
    s->number("rho", c.rho);
    s->number("resolution", c.resolution);
    s->number("lattice_power", c.lattice_power);
    s->boolean("inscribed", c.inscribed);
    s->number("radius", c.clearing_radius);
  }
  validate(c);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<document>", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Fully expanded configuration (all defaults written out).
inline nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  const char* overflow = c.overflow == OverflowPolicy::thin ? "thin" : "censor";
  const char* monitor = c.monitor == ConfinementMonitor::exact_interval ? "exact_interval" : "substep";
  const char* form = c.radius_form == RadiusFunction::Form::power       ? "power"
                     : c.radius_form == RadiusFunction::Form::log_power ? "log_power"
                                                                        : "constant";
  json j;
  j["mode"] = to_string(c.mode);
  j["run"] = {{"seed", c.seed}, {"replicas", c.replicas}};
  j["model"] = {{"dim", c.dim},   {"beta", c.beta}, {"beta_bar", c.beta_bar},         {"t_end", c.t_end},
                {"times", c.times}, {"cap", c.cap},   {"overflow", overflow}, {"thin_target", c.thin_target}};
  j["monitor"] = {{"kind", monitor}, {"step", c.step}, {"refine", c.refine}};
  j["radius"] = {{"form", form}, {"c", c.radius_c}, {"alpha", c.radius_alpha}};
  j["ld"] = {{"horizons", c.horizons},     {"kappas", c.kappas},   {"switch_population", c.switch_population},
             {"slice", c.slice}, {"profile_radii", c.profile_radii}, {"trace_slices", c.trace_slices}};
  j["environment"] = {{"nu", c.nu},
                      {"nu_base", opt(c.nu_base)},
                      {"trap_radius", c.trap_radius},
                      {"box_half_width", c.box_half_width},
                      {"env_seed", c.env_seed},
                      {"file", c.env_file}};
  j["clearing"] = {{"ell", c.ell},
                   {"rho", opt(c.rho)},
                   {"resolution", c.resolution},
                   {"lattice_power", c.lattice_power},
                   {"inscribed", c.inscribed},
                   {"radius", opt(c.clearing_radius)}};
  return j;
}

/// FNV-1a 64 of the canonical (sorted-key, compact) expanded configuration,
/// as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string canon = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace bbmlab
