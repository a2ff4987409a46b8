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
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "bbmlab/environment.hpp"
#include "bbmlab/stats.hpp"

namespace bbmlab {
namespace {

double brute_nearest(const TrapField& f, std::span<const double> x) {
  double best = INFINITY;
  for (std::size_t i = 0; i < f.atoms().size(); ++i) best = std::min(best, std::sqrt(squared_distance(x, f.atoms()[i])));
  return best;
}

std::vector<double> random_point(RngStream& s, const Box& b) {
  std::vector<double> x(static_cast<std::size_t>(b.dim()));
  for (int i = 0; i < b.dim(); ++i) x[i] = b.lo[i] + (b.hi[i] - b.lo[i]) * s.uniform();
  return x;
}

TEST(TrapFieldTest, FromAtomsValidates) {
  const Box box = Box::cube(1, 5.0);
  EXPECT_THROW(TrapField::from_atoms(1, 1.0, 0.0, box, {1, {}}), ParameterError);
  EXPECT_THROW(TrapField::from_atoms(1, -1.0, 0.5, box, {1, {}}), ParameterError);
  EXPECT_THROW(TrapField::from_atoms(1, 1.0, 6.0, box, {1, {}}), ParameterError);
  EXPECT_THROW(TrapField::from_atoms(2, 1.0, 0.5, box, {2, {}}), ParameterError);
  EXPECT_THROW(TrapField::from_atoms(1, 1.0, 0.5, box, {1, {5.6}}), ParameterError);
  EXPECT_THROW(TrapField::from_atoms(0, 1.0, 0.5, box, {1, {}}), ParameterError);
  EXPECT_NO_THROW(TrapField::from_atoms(1, 1.0, 0.5, box, {1, {5.5, -5.5}}));
}

TEST(TrapFieldTest, ClosedBallsAndQueriesOutsideBox) {
  const auto f = TrapField::from_atoms(2, 1.0, 1.0, Box::cube(2, 4.0), {2, {0.0, 0.0, 3.0, 3.0}});
  EXPECT_TRUE(f.is_in_trap(std::vector<double>{1.0, 0.0}));
  EXPECT_FALSE(f.is_in_trap(std::vector<double>{1.0, 1.0}));
  EXPECT_TRUE(is_in_trap(f, std::vector<double>{3.5, 3.5}));
  EXPECT_DOUBLE_EQ(f.nearest_atom_distance(std::vector<double>{0.0, 2.0}), 2.0);
  EXPECT_THROW((void)f.is_in_trap(std::vector<double>{4.1, 0.0}), DomainError);
  EXPECT_THROW((void)f.nearest_atom_distance(std::vector<double>{0.0, -4.5}), DomainError);
}

TEST(TrapFieldTest, EmptyField) {
  const auto f = TrapField::from_atoms(3, 0.0, 0.5, Box::cube(3, 2.0), {3, {}});
  EXPECT_FALSE(f.is_in_trap(std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_EQ(f.nearest_atom_distance(std::vector<double>{0.0, 0.0, 0.0}), INFINITY);
}

struct FieldCase {
  int dim;
  double nu;
  double a;
  double half_width;
};

class IndexAgreementTest : public ::testing::TestWithParam<FieldCase> {};

// The grid index must agree exactly with a linear scan.
TEST_P(IndexAgreementTest, MatchesBruteForce) {
  const auto c = GetParam();
  const Box box = Box::cube(c.dim, c.half_width);
  const auto f = build_trap_field(RngStream(21, static_cast<std::uint64_t>(c.dim)), c.dim, c.nu, c.a, box);
  RngStream q(22, static_cast<std::uint64_t>(c.dim));
  for (int k = 0; k < 3000; ++k) {
    const auto x = random_point(q, box);
    const double d = brute_nearest(f, x);
    ASSERT_EQ(f.nearest_atom_distance(x), d);
    ASSERT_EQ(f.is_in_trap(x), d <= c.a);
  }
}

INSTANTIATE_TEST_SUITE_P(Fields, IndexAgreementTest,
                         ::testing::Values(FieldCase{1, 1.0, 0.5, 30.0}, FieldCase{1, 0.05, 0.2, 30.0},
                                           FieldCase{2, 0.5, 0.3, 8.0}, FieldCase{2, 0.01, 1.0, 10.0},
                                           FieldCase{3, 0.2, 0.5, 4.0}, FieldCase{4, 0.05, 0.5, 3.0}));

TEST(TrapFieldTest, BuildIsDeterministicAndCarriesSeed) {
  const Box box = Box::cube(2, 5.0);
  const auto a = build_trap_field(RngStream(77, 1), 2, 1.0, 0.5, box);
  const auto b = build_trap_field(RngStream(77, 1), 2, 1.0, 0.5, box);
  EXPECT_EQ(a.atoms().coords, b.atoms().coords);
  EXPECT_EQ(a.env_seed(), 77u);
  EXPECT_EQ(a.bounding_box(), box);
  for (std::size_t i = 0; i < a.atoms().size(); ++i) EXPECT_TRUE(box.padded(0.5).contains(a.atoms()[i]));
  EXPECT_THROW(build_trap_field(RngStream(1, 1), 2, -1.0, 0.5, box), ParameterError);
  EXPECT_THROW(build_trap_field(RngStream(1, 1), 2, 1.0, 0.5, Box::cube(3, 5.0)), ParameterError);
}

// P(no atom in a set of volume V) = exp(-nu V).
TEST(TrapFieldTest, VoidProbability) {
  const Box box = Box::cube(2, 2.0);
  const std::vector<double> origin{0.0, 0.0};
  const int n = 20000;
  int voids = 0;
  for (int i = 0; i < n; ++i) {
    const auto f = build_trap_field(RngStream(31, i), 2, 0.4, 0.5, box);
    voids += f.nearest_atom_distance(origin) > 1.0;
  }
  const double expected = std::exp(-0.4 * std::numbers::pi);
  const double se = std::sqrt(expected * (1.0 - expected) / n);
  EXPECT_NEAR(static_cast<double>(voids) / n, expected, 4.0 * se);
}

TEST(TrapFieldTest, ThinningIsNestedWithScaledIntensity) {
  const Box box = Box::cube(1, 200.0);
  const auto f = build_trap_field(RngStream(41, 0), 1, 2.0, 0.5, box);
  const auto g = thin_trap_field(f, 0.25, RngStream(41, 1));
  EXPECT_DOUBLE_EQ(g.intensity(), 0.5);
  RngStream q(41, 2);
  for (int k = 0; k < 2000; ++k) {
    const auto x = random_point(q, box);
    if (g.is_in_trap(x)) {
      ASSERT_TRUE(f.is_in_trap(x));
    }
  }
  const double n = static_cast<double>(f.atoms().size());
  EXPECT_NEAR(static_cast<double>(g.atoms().size()), 0.25 * n, 4.0 * std::sqrt(n * 0.25 * 0.75));
  EXPECT_THROW(thin_trap_field(f, 1.5, RngStream(1, 1)), ParameterError);
  EXPECT_EQ(thin_trap_field(f, 1.0, RngStream(1, 1)).atoms().coords, f.atoms().coords);
}

TEST(ClearingTest, HandBuiltInterval) {
  const auto f = TrapField::from_atoms(1, 1.0, 0.5, Box::cube(1, 6.0), {1, {-5.0, 5.0}});
  const Box search = Box::cube(1, 4.0);
  const auto free_rep = largest_clearing(f, search, 0.25);
  EXPECT_DOUBLE_EQ(free_rep.radius, 4.5);
  ASSERT_EQ(free_rep.center.size(), 1u);
  EXPECT_DOUBLE_EQ(free_rep.center[0], 0.0);
  EXPECT_DOUBLE_EQ(largest_clearing(f, search, 0.25, true).radius, 4.0);
}

TEST(ClearingTest, GridAnswerIsALowerBoundWithinResolution) {
  const Box box = Box::cube(2, 6.0);
  const auto f = build_trap_field(RngStream(51, 0), 2, 0.3, 0.5, box);
  const auto fine = largest_clearing(f, box, 0.05);
  const auto coarse = largest_clearing(f, box, 0.25);
  EXPECT_LE(coarse.radius, fine.radius + 1e-12);
  // moving the centre by at most half a diagonal changes the radius by as much
  EXPECT_GE(coarse.radius, fine.radius - 0.25 * std::sqrt(2.0));
  EXPECT_GE(f.nearest_atom_distance(fine.center), fine.radius + f.trap_radius() - 1e-12);
}

TEST(ClearingTest, Errors) {
  const auto f = TrapField::from_atoms(1, 1.0, 0.5, Box::cube(1, 6.0), {1, {0.0}});
  EXPECT_THROW(largest_clearing(f, Box::cube(1, 4.0), 0.3), ParameterError);
  EXPECT_THROW(largest_clearing(f, Box::cube(1, 4.0), 0.0), ParameterError);
  EXPECT_THROW(largest_clearing(f, Box::cube(1, 7.0), 0.1), DomainError);
  EXPECT_THROW(largest_clearing(f, Box::cube(2, 1.0), 0.1), ParameterError);
}

TEST(ClearingTest, Scale) {
  const auto s = clearing_scale(1, 1.0, 50.0);
  EXPECT_DOUBLE_EQ(s.R0, 0.5);
  EXPECT_NEAR(s.R_ell, 0.095366461209640855, 1e-15);
  EXPECT_FALSE(s.clamped);
  const auto t = clearing_scale(2, 0.5, 1000.0);
  EXPECT_NEAR(t.R0, 1.1283791670955125739, 1e-15);
  EXPECT_EQ(t.R_ell, 0.0);
  EXPECT_TRUE(t.clamped);
  EXPECT_THROW(clearing_scale(1, 0.0, 50.0), ParameterError);
  EXPECT_THROW(clearing_scale(1, 1.0, 2.0), ParameterError);
}

TEST(ClearingTest, GoodPointHit) {
  const auto f = TrapField::from_atoms(1, 1.0, 0.5, Box::cube(1, 10.0), {1, {0.0, 4.0}});
  EXPECT_FALSE(good_point_hit(f, {1, {0.0, 1.0, 2.0, 3.0}}, 1.6));
  EXPECT_TRUE(good_point_hit(f, {1, {0.0, 1.0, 2.0, 3.0}}, 1.5));
  EXPECT_TRUE(good_point_hit(f, {1, {7.0}}, 2.0));
}

TEST(EnvironmentFileTest, RoundTrip) {
  const auto f = build_trap_field(RngStream(61, 0), 3, 0.7, 0.4, Box{{-1.0, -2.0, 0.0}, {1.0, 2.0, 3.0}});
  std::stringstream ss;
  write_environment(ss, f);
  const auto g = read_environment(ss);
  EXPECT_EQ(g.dim(), 3);
  EXPECT_EQ(g.intensity(), 0.7);
  EXPECT_EQ(g.trap_radius(), 0.4);
  EXPECT_EQ(g.env_seed(), 61u);
  EXPECT_EQ(g.bounding_box(), f.bounding_box());
  EXPECT_EQ(g.atoms().coords, f.atoms().coords);
}

TEST(EnvironmentFileTest, RejectsMalformedInput) {
  auto read = [](const std::string& s) {
    std::istringstream in(s);
    return read_environment(in);
  };
  EXPECT_THROW(read(""), ParameterError);
  EXPECT_THROW(read("bbmlab-env v2,1,1,0.5,0,-1:1\n"), ParameterError);
  EXPECT_THROW(read("bbmlab-env v1,2,1,0.5,0,-1:1\n"), ParameterError);
  EXPECT_THROW(read("bbmlab-env v1,1,1,0.5,0,-1:1\n0.1,0.2\n"), ParameterError);
  EXPECT_THROW(read("bbmlab-env v1,1,1,0.5,0,-1:1\n3.0\n"), ParameterError);
  EXPECT_NO_THROW(read("bbmlab-env v1,1,1,0.5,0,-1:1\n0.25\n"));
}

}  // namespace
}  // namespace bbmlab
