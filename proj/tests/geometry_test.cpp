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

#include <vector>

#include <gtest/gtest.h>

#include "bbmlab/geometry.hpp"

namespace bbmlab {
namespace {

TEST(GeometryTest, CheckDim) {
  EXPECT_NO_THROW(check_dim(1));
  EXPECT_NO_THROW(check_dim(kMaxDim));
  EXPECT_THROW(check_dim(0), ParameterError);
  EXPECT_THROW(check_dim(kMaxDim + 1), ParameterError);
}

TEST(GeometryTest, CubeBasics) {
  const Box b = Box::cube(3, 2.0);
  EXPECT_EQ(b.dim(), 3);
  EXPECT_TRUE(b.nondegenerate());
  EXPECT_DOUBLE_EQ(b.volume(), 64.0);
  EXPECT_DOUBLE_EQ(b.min_side(), 4.0);
  EXPECT_FALSE(Box::cube(2, 0.0).nondegenerate());
  EXPECT_FALSE((Box{{0.0}, {INFINITY}}).nondegenerate());
  EXPECT_FALSE(Box{}.nondegenerate());
}

TEST(GeometryTest, ContainsIsClosed) {
  const Box b{{0.0, 0.0}, {1.0, 2.0}};
  EXPECT_TRUE(b.contains(std::vector<double>{0.0, 2.0}));
  EXPECT_TRUE(b.contains(std::vector<double>{0.5, 1.0}));
  EXPECT_FALSE(b.contains(std::vector<double>{1.0 + 1e-12, 1.0}));
  EXPECT_FALSE(b.contains(std::vector<double>{NAN, 1.0}));
  EXPECT_TRUE(b.contains(Box{{0.0, 0.5}, {1.0, 1.5}}));
  EXPECT_FALSE(b.contains(Box{{-0.1, 0.5}, {1.0, 1.5}}));
}

TEST(GeometryTest, DistanceToBoundaryAndPadding) {
  const Box b{{0.0, 0.0}, {4.0, 2.0}};
  EXPECT_DOUBLE_EQ(b.distance_to_boundary(std::vector<double>{1.0, 1.5}), 0.5);
  const Box p = b.padded(1.0);
  EXPECT_EQ(p, (Box{{-1.0, -1.0}, {5.0, 3.0}}));
  EXPECT_TRUE(p.contains(b));
}

TEST(GeometryTest, PointSetAndDistances) {
  PointSet ps{2, {}};
  ps.push_back(std::vector<double>{3.0, 4.0});
  ps.push_back(std::vector<double>{0.0, 1.0});
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_DOUBLE_EQ(norm(ps[0]), 5.0);
  EXPECT_DOUBLE_EQ(squared_distance(ps[0], ps[1]), 18.0);
  EXPECT_TRUE(PointSet{}.empty());
}

}  // namespace
}  // namespace bbmlab
