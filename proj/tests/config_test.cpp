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

#include <string>

#include <gtest/gtest.h>

#include "bbmlab/experiments/config.hpp"
#include "bbmlab/numfmt.hpp"

namespace bbmlab {
namespace {

// Expects parsing `text` to fail with a ConfigError naming `path`.
void expect_error_at(const std::string& text, const std::string& path) {
  try {
    (void)parse_config_text(text);
    ADD_FAILURE() << "no error for " << text;
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), path) << text << ": " << e.what();
  }
}

TEST(ConfigTest, EmptyDocumentGivesDefaults) {
  const auto c = parse_config_text("{}");
  EXPECT_EQ(c.mode, Mode::free);
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.replicas, 1u);
  EXPECT_EQ(c.cap, kDefaultCap);
  EXPECT_EQ(c.observation_times(), std::vector<double>{1.0});
  EXPECT_EQ(c.ld_horizons(), std::vector<double>{1.0});
}

TEST(ConfigTest, ParsesEverySection) {
  const auto c = parse_config_text(R"({
    "mode": "confined",
    "run": {"seed": 7, "replicas": 100},
    "model": {"dim": 1, "beta": 2, "beta_bar": 0.5, "t_end": 50, "times": [10, 50], "cap": 1000,
              "overflow": "thin", "thin_target": 64},
    "monitor": {"kind": "exact_interval", "step": 0.002, "refine": 1},
    "radius": {"form": "power", "c": 1, "alpha": 0.4},
    "ld": {"horizons": [20, 35, 50], "kappas": [0.3, 5], "switch_population": 256, "slice": 0.5,
           "trace_slices": 8},
    "environment": {"nu": 1, "nu_base": 2, "trap_radius": 0.25, "box_half_width": 30, "env_seed": 9},
    "clearing": {"ell": 40, "rho": 2, "resolution": 0.1, "lattice_power": 0, "inscribed": false, "radius": 0.5}
  })");
  EXPECT_EQ(c.mode, Mode::confined);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.beta_bar, 0.5);
  EXPECT_EQ(c.overflow, OverflowPolicy::thin);
  EXPECT_EQ(c.monitor, ConfinementMonitor::exact_interval);
  EXPECT_EQ(c.refine, 1);
  EXPECT_NEAR(c.radius_function()(20.0), 3.3144540173399872, 1e-14);
  EXPECT_EQ(c.kappas, (std::vector<double>{0.3, 5.0}));
  EXPECT_EQ(*c.nu_base, 2.0);
  EXPECT_EQ(c.env_seed, 9u);
  EXPECT_EQ(*c.rho, 2.0);
  EXPECT_FALSE(c.inscribed);
  EXPECT_EQ(*c.clearing_radius, 0.5);
}

TEST(ConfigTest, RoundTripPreservesHash) {
  const auto c = parse_config_text(R"({"mode": "obstacle", "model": {"beta": 6, "t_end": 4, "times": [1, 2, 3, 4]},
                                      "environment": {"nu": 1, "box_half_width": 50}})");
  const auto d = parse_config(to_json(c));
  EXPECT_EQ(config_hash(c), config_hash(d));
  EXPECT_EQ(to_json(c), to_json(d));
  // the expanded document of every mode parses back
  for (const char* mode : {"free", "confined", "theory"}) {
    ExperimentConfig e;
    e.mode = parse_config_text(std::string(R"({"mode": ")") + mode + "\"}").mode;
    EXPECT_EQ(config_hash(parse_config(to_json(e))), config_hash(e)) << mode;
  }
}

// FNV-1a 64 of the expanded default document, computed independently.
TEST(ConfigTest, HashOfDefaults) {
  EXPECT_EQ(config_hash(ExperimentConfig{}), "222311fbe04311c8");
}

TEST(ConfigTest, HashSeesEveryField) {
  const ExperimentConfig base;
  auto changed = [&](auto mutate) {
    ExperimentConfig c = base;
    mutate(c);
    return config_hash(c) != config_hash(base);
  };
  EXPECT_TRUE(changed([](ExperimentConfig& c) { c.beta = 1.5; }));
  EXPECT_TRUE(changed([](ExperimentConfig& c) { c.seed = 2; }));
  EXPECT_TRUE(changed([](ExperimentConfig& c) { c.env_seed = 2; }));
  EXPECT_TRUE(changed([](ExperimentConfig& c) { c.kappas = {0.3}; }));
  EXPECT_TRUE(changed([](ExperimentConfig& c) { c.rho = 2.0; }));
  EXPECT_TRUE(changed([](ExperimentConfig& c) { c.mode = Mode::theory; }));
  EXPECT_EQ(config_hash(base).size(), 16u);
}

TEST(ConfigTest, UnknownFieldsAreRejected) {
  expect_error_at(R"({"modes": "free"})", "modes");
  expect_error_at(R"({"model": {"betta": 1}})", "model.betta");
  expect_error_at(R"({"clearing": {"rho": 1, "foo": 2}})", "clearing.foo");
}

TEST(ConfigTest, TypeErrorsNameTheField) {
  expect_error_at("[1, 2]", "<root>");
  expect_error_at("{nope", "<document>");
  expect_error_at(R"({"mode": "annealed"})", "mode");
  expect_error_at(R"({"model": {"beta": "two"}})", "model.beta");
  expect_error_at(R"({"model": 3})", "model");
  expect_error_at(R"({"run": {"replicas": -4}})", "run.replicas");
  expect_error_at(R"({"run": {"seed": 1.5}})", "run.seed");
  expect_error_at(R"({"model": {"dim": -1}})", "model.dim");
  expect_error_at(R"({"ld": {"kappas": [0.3, "x"]}})", "ld.kappas[1]");
  expect_error_at(R"({"clearing": {"inscribed": 1}})", "clearing.inscribed");
  expect_error_at(R"({"monitor": {"kind": "exact"}})", "monitor.kind");
  expect_error_at(R"({"model": {"overflow": "drop"}})", "model.overflow");
}

TEST(ConfigTest, InvariantsNameTheField) {
  expect_error_at(R"({"run": {"replicas": 0}})", "run.replicas");
  expect_error_at(R"({"model": {"dim": 11}})", "model.dim");
  expect_error_at(R"({"model": {"beta": 0}})", "model.beta");
  expect_error_at(R"({"model": {"beta": 1, "beta_bar": 1.5}})", "model.beta_bar");
  expect_error_at(R"({"model": {"t_end": 2, "times": [1, 3]}})", "model.times");
  expect_error_at(R"({"model": {"t_end": 2, "times": [1, 1]}})", "model.times[1]");
  expect_error_at(R"({"radius": {"form": "power", "alpha": 0.5}})", "radius.alpha");
  expect_error_at(R"({"radius": {"form": "log_power"}, "ld": {"horizons": [1, 2]}})", "ld.horizons[0]");
  expect_error_at(R"({"ld": {"kappas": [0.3, 0]}})", "ld.kappas[1]");
  expect_error_at(R"({"monitor": {"refine": 13}})", "monitor.refine");
  expect_error_at(R"({"environment": {"nu": 1, "nu_base": 0.5}})", "environment.nu_base");
  expect_error_at(R"({"clearing": {"resolution": 0.3}})", "clearing.resolution");
  expect_error_at(R"({"mode": "confined", "model": {"dim": 2}, "monitor": {"kind": "exact_interval"}})",
                  "monitor.kind");
  expect_error_at(R"({"mode": "confined", "monitor": {"kind": "exact_interval"}, "ld": {"profile_radii": [1]}})",
                  "ld.profile_radii");
  expect_error_at(R"({"mode": "clearing_scan", "environment": {"nu": 0}})", "environment.nu");
  expect_error_at(R"({"mode": "clearing_hit", "model": {"t_end": 1}, "environment": {"nu": 1}})", "clearing.radius");
}

TEST(ConfigTest, ObstacleBoxMustHoldTheCloud) {
  // sqrt(2 * 2) * 4 + 6 * sqrt(4) = 20
  expect_error_at(R"({"mode": "obstacle", "model": {"beta": 2, "t_end": 4}, "environment": {"box_half_width": 19.9}})",
                  "environment.box_half_width");
  EXPECT_NO_THROW(parse_config_text(
      R"({"mode": "obstacle", "model": {"beta": 2, "t_end": 4}, "environment": {"box_half_width": 20}})"));
}

TEST(ConfigTest, LoadFromMissingFile) {
  try {
    (void)load_config("/nonexistent/cfg.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "<file>");
  }
}

TEST(NumfmtTest, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(NAN), "nan");
  EXPECT_EQ(format_double(INFINITY), "inf");
  EXPECT_EQ(format_double(-INFINITY), "-inf");
  for (double v : {0.37077742979952391, 1e-300, -2.5e17, 3.3144540173399872})
    EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_TRUE(std::isnan(parse_double("nan")));
  EXPECT_EQ(parse_double("-inf"), -INFINITY);
  EXPECT_EQ(parse_u64("18446744073709551615"), 18446744073709551615ull);
  EXPECT_THROW(parse_double("1.5x"), std::exception);
  EXPECT_THROW(parse_u64("-1"), std::exception);
  const auto parts = split("a,,b", ',');
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[1], "");
}

}  // namespace
}  // namespace bbmlab
