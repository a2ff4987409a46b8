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
#include <cstddef>
#include <span>
#include <vector>

#include "bbmlab/errors.hpp"

namespace bbmlab {

inline constexpr int kMaxDim = 10;

inline void check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) throw ParameterError("dimension must be in [1, 10]");
}

/// Axis-aligned box [lo_i, hi_i] in runtime dimension.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  static Box cube(int dim, double half_width) {
    return Box{std::vector<double>(dim, -half_width), std::vector<double>(dim, half_width)};
  }

  [[nodiscard]] int dim() const noexcept { return static_cast<int>(lo.size()); }

  [[nodiscard]] bool nondegenerate() const noexcept {
    if (lo.empty() || lo.size() != hi.size()) return false;
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(hi[i] > lo[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i])) return false;
    return true;
  }

  [[nodiscard]] double volume() const noexcept {
    double v = 1.0;
    for (std::size_t i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
    return v;
  }

  [[nodiscard]] double min_side() const noexcept {
    double s = INFINITY;
    for (std::size_t i = 0; i < lo.size(); ++i) s = std::fmin(s, hi[i] - lo[i]);
    return s;
  }

  [[nodiscard]] bool contains(std::span<const double> x) const noexcept {
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
    return true;
  }

  [[nodiscard]] bool contains(const Box& other) const noexcept {
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (other.lo[i] < lo[i] || other.hi[i] > hi[i]) return false;
    return true;
  }

  /// Euclidean distance from an interior point to the box boundary.
  [[nodiscard]] double distance_to_boundary(std::span<const double> x) const noexcept {
    double d = INFINITY;
    for (std::size_t i = 0; i < lo.size(); ++i) d = std::fmin(d, std::fmin(x[i] - lo[i], hi[i] - x[i]));
    return d;
  }

  [[nodiscard]] Box padded(double pad) const {
    Box b = *this;
    for (std::size_t i = 0; i < lo.size(); ++i) {
      b.lo[i] -= pad;
      b.hi[i] += pad;
    }
    return b;
  }

  bool operator==(const Box&) const = default;
};

/// Flat row-major point list in a fixed dimension.
struct PointSet {
  int dim = 1;
  std::vector<double> coords;

  [[nodiscard]] std::size_t size() const noexcept { return coords.size() / static_cast<std::size_t>(dim); }
  [[nodiscard]] bool empty() const noexcept { return coords.empty(); }
  [[nodiscard]] std::span<const double> operator[](std::size_t i) const noexcept {
    return {coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  void push_back(std::span<const double> p) { coords.insert(coords.end(), p.begin(), p.end()); }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double norm(std::span<const double> a) noexcept {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

}  // namespace bbmlab
