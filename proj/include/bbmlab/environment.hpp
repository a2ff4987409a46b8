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
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bbmlab/errors.hpp"
#include "bbmlab/geometry.hpp"
#include "bbmlab/kernels.hpp"
#include "bbmlab/numfmt.hpp"
#include "bbmlab/rng.hpp"
#include "bbmlab/theory.hpp"

namespace bbmlab {

/// Poissonian trap field K = union of closed balls B(x_i, a), realized on a
/// bounding box. Atoms are sampled on the box padded by `a`, so traps that
/// reach into the box from outside are present. Immutable after construction.
class TrapField {
 public:
  TrapField() = default;

  /// Field from explicit atoms. Atoms outside box.padded(a) are rejected.
  static TrapField from_atoms(int dim, double intensity, double trap_radius, const Box& box, PointSet atoms,
                              std::uint64_t env_seed = 0) {
    check_dim(dim);
    if (!(trap_radius > 0.0)) throw ParameterError("trap field: trap radius must be positive");
    if (!(intensity >= 0.0)) throw ParameterError("trap field: intensity must be >= 0");
    if (box.dim() != dim || !box.nondegenerate()) throw ParameterError("trap field: bad bounding box");
    if (box.min_side() < 2.0 * trap_radius) throw ParameterError("trap field: box smaller than one trap diameter");
    if (atoms.dim != dim) throw ParameterError("trap field: atom dimension mismatch");
    TrapField f;
    f.dim_ = dim;
    f.intensity_ = intensity;
    f.trap_radius_ = trap_radius;
    f.env_seed_ = env_seed;
    f.box_ = box;
    f.realized_ = box.padded(trap_radius);
    for (std::size_t i = 0; i < atoms.size(); ++i)
      if (!f.realized_.contains(atoms[i])) throw ParameterError("trap field: atom outside padded box");
    f.atoms_ = std::move(atoms);
    f.build_index();
    return f;
  }

  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] double intensity() const noexcept { return intensity_; }
  [[nodiscard]] double trap_radius() const noexcept { return trap_radius_; }
  [[nodiscard]] std::uint64_t env_seed() const noexcept { return env_seed_; }
  [[nodiscard]] const Box& bounding_box() const noexcept { return box_; }
  [[nodiscard]] const PointSet& atoms() const noexcept { return atoms_; }

  /// x in K, i.e. within distance a of some atom (closed balls).
  [[nodiscard]] bool is_in_trap(std::span<const double> x) const {
    require_inside(x);
    if (atoms_.empty()) return false;
    const double a2 = trap_radius_ * trap_radius_;
    std::array<std::int64_t, kMaxDim> c{};
    cell_of(x, c);
    std::array<std::int64_t, kMaxDim> lo{};
    std::array<std::int64_t, kMaxDim> hi{};
    for (int i = 0; i < dim_; ++i) {
      lo[i] = std::max<std::int64_t>(0, c[i] - 1);
      hi[i] = std::min<std::int64_t>(counts_[i] - 1, c[i] + 1);
    }
    bool found = false;
    for_each_cell(lo, hi, [&](std::size_t cell) {
      for (std::size_t k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k)
        if (squared_distance(x, atoms_[order_[k]]) <= a2) return found = true;
      return false;
    });
    return found;
  }

  /// Distance from x to the nearest atom centre; +inf when there are none.
  [[nodiscard]] double nearest_atom_distance(std::span<const double> x) const {
    require_inside(x);
    if (atoms_.empty()) return INFINITY;
    std::array<std::int64_t, kMaxDim> c{};
    cell_of(x, c);
    double best2 = INFINITY;
    double min_cell = INFINITY;
    std::int64_t max_ring = 0;
    for (int i = 0; i < dim_; ++i) {
      min_cell = std::min(min_cell, cell_size_[i]);
      max_ring = std::max({max_ring, c[i], counts_[i] - 1 - c[i]});
    }
    for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
      std::array<std::int64_t, kMaxDim> lo{};
      std::array<std::int64_t, kMaxDim> hi{};
      for (int i = 0; i < dim_; ++i) {
        lo[i] = std::max<std::int64_t>(0, c[i] - ring);
        hi[i] = std::min<std::int64_t>(counts_[i] - 1, c[i] + ring);
      }
      for_each_cell(lo, hi, [&](std::size_t cell) {
        // only the shell at Chebyshev distance `ring`
        std::size_t rem = cell;
        std::int64_t cheb = 0;
        for (int i = 0; i < dim_; ++i) {
          const auto ci = static_cast<std::int64_t>(rem % static_cast<std::size_t>(counts_[i]));
          rem /= static_cast<std::size_t>(counts_[i]);
          cheb = std::max(cheb, std::abs(ci - c[i]));
        }
        if (cheb != ring) return false;
        for (std::size_t k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k)
          best2 = std::min(best2, squared_distance(x, atoms_[order_[k]]));
        return false;
      });
      const double reach = static_cast<double>(ring) * min_cell;
      if (best2 <= reach * reach) break;
    }
    return std::sqrt(best2);
  }

  /// Same as nearest_atom_distance but by scanning every atom.
  [[nodiscard]] double nearest_atom_distance_brute(std::span<const double> x) const {
    double best2 = INFINITY;
    for (std::size_t i = 0; i < atoms_.size(); ++i) best2 = std::min(best2, squared_distance(x, atoms_[i]));
    return std::sqrt(best2);
  }

 private:
  void require_inside(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim_) throw DomainError("trap field query: dimension mismatch");
    if (!box_.contains(x)) throw DomainError("trap field query outside the realized box");
  }

  void cell_of(std::span<const double> x, std::array<std::int64_t, kMaxDim>& c) const noexcept {
    for (int i = 0; i < dim_; ++i) {
      auto k = static_cast<std::int64_t>(std::floor((x[i] - realized_.lo[i]) / cell_size_[i]));
      c[i] = std::clamp<std::int64_t>(k, 0, counts_[i] - 1);
    }
  }

  // Visits linear indices of all cells in [lo, hi]; stops when fn returns true.
  template <class Fn>
  void for_each_cell(const std::array<std::int64_t, kMaxDim>& lo, const std::array<std::int64_t, kMaxDim>& hi,
                     Fn&& fn) const {
    std::array<std::int64_t, kMaxDim> cur = lo;
    for (;;) {
      std::size_t lin = 0;
      for (int i = dim_ - 1; i >= 0; --i) lin = lin * static_cast<std::size_t>(counts_[i]) + static_cast<std::size_t>(cur[i]);
      if (fn(lin)) return;
      int i = 0;
      for (; i < dim_; ++i) {
        if (++cur[i] <= hi[i]) break;
        cur[i] = lo[i];
      }
      if (i == dim_) return;
    }
  }

  void build_index() {
    // Cells are at least `a` wide so a trap query needs only adjacent cells;
    // the total cell count stays proportional to the atom count.
    const double vol = realized_.volume();
    const double max_cells = std::max(64.0, std::min(4.0 * static_cast<double>(atoms_.size()) + 64.0, 4194304.0));
    const double target = std::max(trap_radius_, std::pow(vol / max_cells, 1.0 / dim_));
    std::size_t total = 1;
    for (int i = 0; i < dim_; ++i) {
      const double side = realized_.hi[i] - realized_.lo[i];
      counts_[i] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(side / target)));
      cell_size_[i] = side / static_cast<double>(counts_[i]);
      total *= static_cast<std::size_t>(counts_[i]);
    }
    std::vector<std::size_t> cell(atoms_.size());
    cell_start_.assign(total + 1, 0);
    std::array<std::int64_t, kMaxDim> c{};
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
      cell_of(atoms_[k], c);
      std::size_t lin = 0;
      for (int i = dim_ - 1; i >= 0; --i) lin = lin * static_cast<std::size_t>(counts_[i]) + static_cast<std::size_t>(c[i]);
      cell[k] = lin;
      ++cell_start_[lin + 1];
    }
    for (std::size_t i = 0; i < total; ++i) cell_start_[i + 1] += cell_start_[i];
    order_.assign(atoms_.size(), 0);
    std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
    for (std::size_t k = 0; k < atoms_.size(); ++k) order_[fill[cell[k]]++] = k;
  }

  int dim_ = 1;
  double intensity_ = 0.0;
  double trap_radius_ = 1.0;
  std::uint64_t env_seed_ = 0;
  Box box_;
  Box realized_;
  PointSet atoms_;
  std::array<std::int64_t, kMaxDim> counts_{};
  std::array<double, kMaxDim> cell_size_{};
  std::vector<std::size_t> cell_start_;
  std::vector<std::size_t> order_;
};

/// PPP(nu) trap field of radius a on `box` (atoms on the a-padded box).
inline TrapField build_trap_field(RngStream env_stream, int dim, double nu, double trap_radius, const Box& box) {
  check_dim(dim);
  if (!(trap_radius > 0.0)) throw ParameterError("build_trap_field: trap radius must be positive");
  if (!(nu >= 0.0)) throw ParameterError("build_trap_field: intensity must be >= 0");
  if (box.dim() != dim || !box.nondegenerate()) throw ParameterError("build_trap_field: bad box");
  if (box.min_side() < 2.0 * trap_radius) throw ParameterError("build_trap_field: box smaller than one trap diameter");
  PointSet atoms = sample_ppp_in_box(env_stream, nu, box.padded(trap_radius));
  return TrapField::from_atoms(dim, nu, trap_radius, box, std::move(atoms), env_stream.seed());
}

/// Independent thinning: each atom kept with probability `keep`. The result is
/// a PPP(keep * nu) field whose trap set is contained in the original one.
inline TrapField thin_trap_field(const TrapField& field, double keep, RngStream marks) {
  if (!(keep >= 0.0 && keep <= 1.0)) throw ParameterError("thin_trap_field: keep must be in [0, 1]");
  PointSet kept{field.dim(), {}};
  for (std::size_t i = 0; i < field.atoms().size(); ++i)
    if (marks.uniform() < keep) kept.push_back(field.atoms()[i]);
  return TrapField::from_atoms(field.dim(), field.intensity() * keep, field.trap_radius(), field.bounding_box(),
                               std::move(kept), field.env_seed());
}

inline bool is_in_trap(const TrapField& field, std::span<const double> x) { return field.is_in_trap(x); }

struct ClearingReport {
  std::vector<double> center;
  double radius;
  Box search_box;
  double resolution;
};

/// Largest trap-free ball centred on a grid of pitch <= resolution over the
/// search box. In inscribed mode the ball must also fit inside the search box.
/// The reported radius is a lower bound on the true largest clearing.
inline ClearingReport largest_clearing(const TrapField& field, const Box& search_box, double resolution,
                                       bool inscribed = false) {
  if (!(resolution > 0.0) || resolution > 0.5 * field.trap_radius())
    throw ParameterError("largest_clearing: resolution must be in (0, a/2]");
  if (search_box.dim() != field.dim() || !search_box.nondegenerate())
    throw ParameterError("largest_clearing: empty search box");
  if (!field.bounding_box().contains(search_box)) throw DomainError("largest_clearing: search box outside field");
  const int d = field.dim();
  std::array<std::int64_t, kMaxDim> n{};
  for (int i = 0; i < d; ++i)
    n[i] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil((search_box.hi[i] - search_box.lo[i]) / resolution)));
  std::array<std::int64_t, kMaxDim> idx{};
  std::vector<double> x(static_cast<std::size_t>(d));
  ClearingReport best{{}, -INFINITY, search_box, resolution};
  for (;;) {
    for (int i = 0; i < d; ++i)
      x[i] = search_box.lo[i] + (search_box.hi[i] - search_box.lo[i]) * static_cast<double>(idx[i]) / static_cast<double>(n[i]);
    double r = std::max(0.0, field.nearest_atom_distance(x) - field.trap_radius());
    if (inscribed) r = std::min(r, search_box.distance_to_boundary(x));
    if (r > best.radius) {
      best.radius = r;
      best.center = x;
    }
    int i = 0;
    for (; i < d; ++i) {
      if (++idx[i] <= n[i]) break;
      idx[i] = 0;
    }
    if (i == d) break;
  }
  return best;
}

struct ClearingScale {
  double R0;
  double R_ell;
  bool clamped;  // raw R_ell was negative and was replaced by 0
};

/// R0 = (d / (nu omega_d))^{1/d} and R_ell = R0 (log ell)^{1/d} - (log log ell)^2.
inline ClearingScale clearing_scale(int dim, double nu, double ell) {
  if (!(nu > 0.0)) throw ParameterError("clearing_scale: nu must be positive");
  if (!(ell > std::numbers::e)) throw ParameterError("clearing_scale: ell must exceed e");
  const double r0 = theory::constants(dim, nu).R0;
  const double ll = std::log(std::log(ell));
  const double raw = r0 * std::pow(std::log(ell), 1.0 / dim) - ll * ll;
  return {r0, std::max(0.0, raw), raw < 0.0};
}

/// Whether some path vertex x has B(x, clearing_radius) inside the trap-free
/// region, i.e. nearest atom distance >= clearing_radius + a.
inline bool good_point_hit(const TrapField& field, const PointSet& path, double clearing_radius) {
  const double need = clearing_radius + field.trap_radius();
  for (std::size_t i = 0; i < path.size(); ++i)
    if (field.nearest_atom_distance(path[i]) >= need) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Environment file: header
//   bbmlab-env v1,<dim>,<nu>,<trap_radius>,<env_seed>,<lo_1>:<hi_1> ... <lo_d>:<hi_d>
// then one row per atom with comma-separated coordinates in shortest
// round-trip form.

inline void write_environment(std::ostream& os, const TrapField& field) {
  os << "bbmlab-env v1," << field.dim() << ',' << format_double(field.intensity()) << ','
     << format_double(field.trap_radius()) << ',' << field.env_seed() << ',';
  const Box& b = field.bounding_box();
  for (int i = 0; i < b.dim(); ++i) os << (i ? " " : "") << format_double(b.lo[i]) << ':' << format_double(b.hi[i]);
  os << '\n';
  for (std::size_t k = 0; k < field.atoms().size(); ++k) {
    const auto p = field.atoms()[k];
    for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << format_double(p[i]);
    os << '\n';
  }
}

inline TrapField read_environment(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParameterError("environment file: empty");
  const auto head = split(line, ',');
  if (head.size() != 6 || head[0] != "bbmlab-env v1") throw ParameterError("environment file: bad header '" + line + "'");
  const int dim = static_cast<int>(parse_u64(head[1]));
  check_dim(dim);
  const double nu = parse_double(head[2]);
  const double a = parse_double(head[3]);
  const std::uint64_t seed = parse_u64(head[4]);
  const auto axes = split(head[5], ' ');
  if (static_cast<int>(axes.size()) != dim) throw ParameterError("environment file: box dimension mismatch");
  Box box;
  for (auto ax : axes) {
    const auto lh = split(ax, ':');
    if (lh.size() != 2) throw ParameterError("environment file: bad box axis");
    box.lo.push_back(parse_double(lh[0]));
    box.hi.push_back(parse_double(lh[1]));
  }
  PointSet atoms{dim, {}};
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (static_cast<int>(cols.size()) != dim) throw ParameterError("environment file: bad atom row '" + line + "'");
    for (auto c : cols) atoms.coords.push_back(parse_double(c));
  }
  return TrapField::from_atoms(dim, nu, a, box, std::move(atoms), seed);
}

}  // namespace bbmlab
