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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "bbmlab/engine.hpp"
#include "bbmlab/stats.hpp"
#include "bbmlab/theory.hpp"

namespace bbmlab {
namespace {

// p_t e^{beta t} at d = 1, r = 1, t = 1, beta = 1 (interval series value
// 0.37077742979952391 from mpmath).
constexpr double kMeanConfined = 0.37077742979952391 * 2.718281828459045;

TEST(RadiusFunctionTest, Forms) {
  EXPECT_NEAR(RadiusFunction::power(1.0, 0.4)(20.0), 3.3144540173399872, 1e-14);
  EXPECT_NEAR(RadiusFunction::log_power(2.0, 2)(std::exp(4.0)), 4.0, 1e-14);
  EXPECT_EQ(RadiusFunction::constant(1.5)(123.0), 1.5);
  EXPECT_THROW(RadiusFunction::power(1.0, 0.5), ParameterError);
  EXPECT_THROW(RadiusFunction::power(0.0, 0.4), ParameterError);
  EXPECT_THROW(RadiusFunction::log_power(1.0, 1)(1.0), ParameterError);
  EXPECT_THROW(RadiusFunction::constant(0.0), ParameterError);
  EXPECT_THROW(RadiusFunction::power(1.0, 0.3)(0.0), ParameterError);
}

TEST(FreeBbmTest, DeterministicPerStream) {
  const auto a = run_free_bbm(RngStream(1, 5), 2, 1.0, 3.0, {1.0, 2.0, 3.0});
  const auto b = run_free_bbm(RngStream(1, 5), 2, 1.0, 3.0, {1.0, 2.0, 3.0});
  EXPECT_EQ(a.N, b.N);
  EXPECT_EQ(a.range_radius, b.range_radius);
  EXPECT_EQ(a.total_born, b.total_born);
}

TEST(FreeBbmTest, PathwiseInvariants) {
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto o = run_free_bbm(RngStream(2, i), 1, 1.0, 2.0, {0.5, 1.0, 1.5, 2.0});
    ASSERT_FALSE(o.censored);
    for (std::size_t k = 1; k < o.N.size(); ++k) {
      ASSERT_GE(o.N[k], o.N[k - 1]);
      ASSERT_GE(o.range_radius[k], o.range_radius[k - 1]);
    }
    // strictly dyadic, no deaths: every branch adds one particle
    ASSERT_EQ(static_cast<double>(o.total_born), o.N.back());
    ASSERT_GE(o.N.front(), 1.0);
  }
}

TEST(FreeBbmTest, YuleMoments) {
  const int n = 20000;
  std::vector<double> ns;
  int ones = 0;
  for (int i = 0; i < n; ++i) {
    const auto o = run_free_bbm(RngStream(3, i), 1, 1.0, 1.0, {});
    ns.push_back(o.N[0]);
    ones += o.N[0] == 1.0;
  }
  const auto m = stats::mean_ci(ns);
  EXPECT_NEAR(m.mean, std::exp(1.0), 4.0 * m.se);
  const double p = std::exp(-1.0);
  EXPECT_NEAR(static_cast<double>(ones) / n, p, 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(FreeBbmTest, CapCensorsAndKeepsCompletedObservations) {
  const auto o = run_free_bbm(RngStream(4, 0), 1, 5.0, 3.0, {0.01, 3.0}, 50);
  EXPECT_TRUE(o.censored);
  EXPECT_LE(o.total_born, 50u);
  EXPECT_EQ(o.N[0], 1.0);  // no branching by t = 0.01 for this stream
  EXPECT_TRUE(std::isnan(o.N[1]));
  EXPECT_TRUE(std::isnan(o.range_radius[1]));
  EXPECT_FALSE(std::isnan(o.range_radius[0]));
}

TEST(FreeBbmTest, Errors) {
  EXPECT_THROW(run_free_bbm(RngStream(1, 1), 1, 0.0, 1.0, {}), ParameterError);
  EXPECT_THROW(run_free_bbm(RngStream(1, 1), 1, 1.0, 0.0, {}), ParameterError);
  EXPECT_THROW(run_free_bbm(RngStream(1, 1), 1, 1.0, 1.0, {2.0}), ParameterError);
  EXPECT_THROW(run_free_bbm(RngStream(1, 1), 1, 1.0, 1.0, {0.5, 0.5}), ParameterError);
  EXPECT_THROW(run_free_bbm(RngStream(1, 1), 0, 1.0, 1.0, {}), ParameterError);
  EXPECT_THROW(run_free_bbm(RngStream(1, 1), 1, 1.0, 1.0, {}, 0), ParameterError);
}

TEST(ObstacleBbmTest, FullRateMatchesFreeRunExactly) {
  const auto f = TrapField::from_atoms(1, 1.0, 0.5, Box::cube(1, 30.0), {1, {0.0, 1.0, -2.0}});
  GrowthOptions opt;
  opt.observation_times = {1.0, 2.0};
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto a = run_obstacle_bbm(RngStream(5, i), 1, {2.0, 2.0, &f}, 2.0, opt);
    const auto b = run_free_bbm(RngStream(5, i), 1, 2.0, 2.0, {1.0, 2.0});
    ASSERT_EQ(a.N, b.N);
  }
}

TEST(ObstacleBbmTest, AllCoveringTrapWithoutBranching) {
  const auto f = TrapField::from_atoms(1, 1.0, 10.0, Box::cube(1, 10.0), {1, {0.0}});
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto o = run_obstacle_bbm(RngStream(6, i), 1, {3.0, 0.0, &f}, 2.0, {});
    ASSERT_EQ(o.N[0], 1.0);
    ASSERT_EQ(o.total_born, 1u);
  }
}

// Shrinking the trap set only adds accepted branch candidates; each
// particle's own path is unchanged, so the tree grows pathwise.
TEST(ObstacleBbmTest, MonotoneCouplingInTrapSet) {
  const Box box = Box::cube(1, 40.0);
  const auto big = build_trap_field(RngStream(7, 0), 1, 2.0, 0.5, box);
  const auto small = thin_trap_field(big, 0.5, RngStream(7, 1));
  GrowthOptions opt;
  opt.observation_times = {1.0, 2.0, 3.0};
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto in_big = run_obstacle_bbm(RngStream(8, i), 1, {2.0, 0.0, &big}, 3.0, opt);
    const auto in_small = run_obstacle_bbm(RngStream(8, i), 1, {2.0, 0.0, &small}, 3.0, opt);
    const auto none = run_free_bbm(RngStream(8, i), 1, 2.0, 3.0, opt.observation_times);
    for (std::size_t k = 0; k < 3; ++k) {
      ASSERT_LE(in_big.N[k], in_small.N[k]);
      ASSERT_LE(in_small.N[k], none.N[k]);
    }
  }
}

TEST(ObstacleBbmTest, BoxExitThrows) {
  const auto f = TrapField::from_atoms(1, 1.0, 0.1, Box::cube(1, 0.3), {1, {}});
  try {
    (void)run_obstacle_bbm(RngStream(9, 0), 1, {1.0, 0.5, &f}, 10.0, {});
    FAIL() << "expected EnvironmentTooSmall";
  } catch (const EnvironmentTooSmall& e) {
    EXPECT_GT(e.reached(), 0.3);
    EXPECT_GE(e.required_half_width(), std::sqrt(2.0) * 10.0 + 6.0 * std::sqrt(10.0));
  }
}

TEST(ObstacleBbmTest, Errors) {
  const auto f2 = TrapField::from_atoms(2, 1.0, 0.5, Box::cube(2, 5.0), {2, {}});
  EXPECT_THROW(run_obstacle_bbm(RngStream(1, 1), 1, {1.0, 0.5, &f2}, 1.0, {}), ParameterError);
  EXPECT_THROW(run_obstacle_bbm(RngStream(1, 1), 1, {1.0, 1.5, nullptr}, 1.0, {}), ParameterError);
  EXPECT_THROW(run_obstacle_bbm(RngStream(1, 1), 1, {1.0, -0.1, nullptr}, 1.0, {}), ParameterError);
  GrowthOptions bad;
  bad.overflow = OverflowPolicy::thin;
  bad.thin_target = 1;
  EXPECT_THROW(run_obstacle_bbm(RngStream(1, 1), 1, {1.0, 0.5, nullptr}, 1.0, bad), ParameterError);
}

TEST(ObstacleBbmTest, ThinningIsUnbiased) {
  GrowthOptions opt;
  opt.overflow = OverflowPolicy::thin;
  opt.thin_target = 8;
  const int n = 4000;
  std::vector<double> ns;
  int thinned = 0;
  for (int i = 0; i < n; ++i) {
    const auto o = run_obstacle_bbm(RngStream(10, i), 1, {1.0, 1.0, nullptr}, 4.0, opt);
    ns.push_back(o.N[0]);
    thinned += o.thinned;
  }
  EXPECT_GT(thinned, n / 2);
  const auto m = stats::mean_ci(ns);
  EXPECT_NEAR(m.mean, std::exp(4.0), 4.0 * m.se);
}

TEST(ConfinedTest, ProfileIsMonotoneAndPruningInvariant) {
  const std::vector<double> grid{0.5, 1.0, 2.0};
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto prof = confined_mass_profile(RngStream(11, i), 1, 1.0, 1.5, grid);
    ASSERT_LE(prof.n_profile[0], prof.n_profile[1]);
    ASSERT_LE(prof.n_profile[1], prof.n_profile[2]);
    // pruning at 1 instead of 2 does not change the count at radius 1
    const auto single = run_confined_bbm(RngStream(11, i), 1, 1.0, RadiusFunction::constant(1.0), 1.5);
    ASSERT_EQ(single.n_profile[0], prof.n_profile[1]);
  }
}

TEST(ConfinedTest, TraceGridAndErrors) {
  ConfinedOptions opt;
  opt.trace_slices = 4;
  const auto o = confined_mass_profile(RngStream(12, 0), 2, 1.0, 2.0, {3.0}, opt);
  EXPECT_EQ(o.trace_times, (std::vector<double>{0.5, 1.0, 1.5, 2.0}));
  EXPECT_EQ(o.trace_counts.back(), o.n_profile[0]);
  EXPECT_THROW(confined_mass_profile(RngStream(1, 1), 1, 1.0, 1.0, {}), ParameterError);
  EXPECT_THROW(confined_mass_profile(RngStream(1, 1), 1, 1.0, 1.0, {2.0, 1.0}), ParameterError);
  EXPECT_THROW(confined_mass_profile(RngStream(1, 1), 1, 1.0, 1.0, {0.0}), ParameterError);
  EXPECT_THROW(confined_mass_profile(RngStream(1, 1), 1, 0.0, 1.0, {1.0}), ParameterError);
  opt.trace_slices = 0;
  EXPECT_THROW(confined_mass_profile(RngStream(1, 1), 1, 1.0, 1.0, {1.0}, opt), ParameterError);
}

TEST(ConfinedTest, CapCensors) {
  ConfinedOptions opt;
  opt.cap = 10;
  const auto o = confined_mass_profile(RngStream(13, 0), 1, 4.0, 3.0, {100.0}, opt);
  EXPECT_TRUE(o.censored);
}

TEST(ConfinedTest, ManyToOneMean) {
  const int n = 20000;
  std::vector<double> xs;
  ConfinedOptions opt;
  opt.monitor = {2e-3, 0};
  for (int i = 0; i < n; ++i)
    xs.push_back(static_cast<double>(
        run_confined_bbm(RngStream(14, i), 1, 1.0, RadiusFunction::constant(1.0), 1.0, opt).n_profile[0]));
  const auto m = stats::mean_ci(xs);
  EXPECT_NEAR(m.mean, kMeanConfined, 4.0 * m.se);
}

TEST(LDTest, ExactMonitorMeanWithAndWithoutProjection) {
  for (std::uint64_t sw : {0u, 4u}) {
    LDOptions opt;
    opt.switch_population = sw;
    const int n = 20000;
    std::vector<double> xs;
    int projected = 0;
    for (int i = 0; i < n; ++i) {
      const auto o = run_confined_ld(RngStream(15, i), 1, 1.0, 1.0, 1.0, opt);
      xs.push_back(o.n_t);
      projected += o.projected;
    }
    const auto m = stats::mean_ci(xs);
    EXPECT_NEAR(m.mean, kMeanConfined, 4.0 * m.se) << sw;
    if (sw == 0) {
      EXPECT_EQ(projected, 0);
    } else {
      EXPECT_GT(projected, 0);
    }
  }
}

TEST(LDTest, SubstepMonitorMean) {
  LDOptions opt;
  opt.monitor = ConfinementMonitor::substep;
  opt.substep = {2e-3, 0};
  const int n = 20000;
  std::vector<double> xs;
  for (int i = 0; i < n; ++i) xs.push_back(run_confined_ld(RngStream(16, i), 1, 1.0, 1.0, 1.0, opt).n_t);
  const auto m = stats::mean_ci(xs);
  EXPECT_NEAR(m.mean, kMeanConfined, 4.0 * m.se);
}

TEST(LDTest, OutcomeFlagsAreConsistent) {
  for (std::uint64_t i = 0; i < 300; ++i) {
    const auto o = run_confined_ld(RngStream(17, i), 1, 2.0, 3.0, 0.8);
    if (o.extinct) {
      ASSERT_EQ(o.n_t, 0.0);
      ASSERT_EQ(o.log_n_t, -INFINITY);
      ASSERT_FALSE(o.projected);
    } else {
      ASSERT_GT(o.n_t, 0.0);
      ASSERT_NEAR(o.log_n_t, std::log(o.n_t), 1e-12);
      if (!o.projected) {
        ASSERT_EQ(o.n_t, std::round(o.n_t));
      }
    }
  }
}

TEST(LDTest, CapAndErrors) {
  LDOptions opt;
  opt.monitor = ConfinementMonitor::substep;
  opt.cap = 20;
  const auto o = run_confined_ld(RngStream(18, 0), 2, 3.0, 3.0, 50.0, opt);
  EXPECT_TRUE(o.censored);
  EXPECT_TRUE(std::isnan(o.n_t));
  EXPECT_THROW(run_confined_ld(RngStream(1, 1), 2, 1.0, 1.0, 1.0), ParameterError);
  EXPECT_THROW(run_confined_ld(RngStream(1, 1), 1, 1.0, 1.0, 0.0), ParameterError);
  LDOptions bad;
  bad.slice = 0.0;
  EXPECT_THROW(run_confined_ld(RngStream(1, 1), 1, 1.0, 1.0, 1.0, bad), ParameterError);
}

TEST(DispatchTest, RuntimeDimension) {
  for (int d = 1; d <= kMaxDim; ++d) EXPECT_EQ(dispatch_dim(d, []<int D>() { return D; }), d);
  EXPECT_THROW(dispatch_dim(11, []<int D>() { return D; }), ParameterError);
}

}  // namespace
}  // namespace bbmlab
