#ifndef SWARM_SPATIAL_GRID_HPP
#define SWARM_SPATIAL_GRID_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swarm/agent_store.hpp"
#include "swarm/error.hpp"
#include "swarm/geometry.hpp"

namespace swarm {

struct CellCoord {
  int x;
  int y;
  friend bool operator==(CellCoord, CellCoord) = default;
};

template <std::floating_point Real>
struct BasicNeighbor {
  std::uint32_t j;
  Real distance;
  BasicVec2<Real> disp;  // torus displacement from the query agent to j
};

using Neighbor = BasicNeighbor<float>;

/// Uniform-grid index over a toroidal world. The lattice has
/// floor(extent / cell_size) cells per axis, so every cell is at least
/// cell_size wide and a 3x3 stencil covers any query of radius <= cell_size.
/// Cell contents are stored CSR-style, each cell in ascending agent order.
template <std::floating_point Real>
class BasicSpatialGrid {
 public:
  using vec_type = BasicVec2<Real>;
  using world_type = BasicWorldSpec<Real>;

  BasicSpatialGrid() = default;

  static BasicSpatialGrid build(const BasicAgentStore<Real>& store, const world_type& world, Real cell_size) {
    if (!(cell_size > Real(0)) || !std::isfinite(cell_size)) throw ConfigError("cell_size", "must be > 0");
    world.validate();
    BasicSpatialGrid g;
    g.world_ = world;
    g.cell_size_ = cell_size;
    g.nx_ = std::max(1, static_cast<int>(std::floor(world.width / cell_size)));
    g.ny_ = std::max(1, static_cast<int>(std::floor(world.height / cell_size)));
    g.cell_w_ = world.width / static_cast<Real>(g.nx_);
    g.cell_h_ = world.height / static_cast<Real>(g.ny_);

    const std::size_t n = store.size();
    const auto xs = store.x();
    const auto ys = store.y();
    std::vector<std::uint32_t> cell_of(n);
    g.start_.assign(static_cast<std::size_t>(g.nx_) * g.ny_ + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const vec_type p{xs[i], ys[i]};
      if (!world.contains(p))
        throw InvariantViolation("agent " + std::to_string(i) + " position (" + std::to_string(p.x) + ", " +
                                 std::to_string(p.y) + ") lies outside the world");
      const CellCoord c = g.cell_of(p);
      cell_of[i] = static_cast<std::uint32_t>(g.flat(c.x, c.y));
      ++g.start_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < g.start_.size(); ++c) g.start_[c] += g.start_[c - 1];
    g.items_.resize(n);
    std::vector<std::uint32_t> fill(g.start_.begin(), g.start_.end() - 1);
    for (std::size_t i = 0; i < n; ++i) g.items_[fill[cell_of[i]]++] = static_cast<std::uint32_t>(i);
    return g;
  }

  Real cell_size() const { return cell_size_; }
  int cells_x() const { return nx_; }
  int cells_y() const { return ny_; }
  const world_type& world() const { return world_; }

  CellCoord cell_of(vec_type p) const {
    const int cx = std::min(nx_ - 1, static_cast<int>(std::floor(p.x / cell_w_)));
    const int cy = std::min(ny_ - 1, static_cast<int>(std::floor(p.y / cell_h_)));
    return {std::max(0, cx), std::max(0, cy)};
  }

  /// Agents in cell c (coordinates wrap around the lattice).
  std::span<const std::uint32_t> cell(CellCoord c) const {
    const std::size_t f = flat(wrap(c.x, nx_), wrap(c.y, ny_));
    return std::span<const std::uint32_t>(items_).subspan(start_[f], start_[f + 1] - start_[f]);
  }

  /// Calls fn(span of agent indices) once for each distinct cell of the
  /// 3x3 stencil around the cell containing p.
  template <class Fn>
  void for_each_stencil_cell(vec_type p, Fn&& fn) const {
    const CellCoord c = cell_of(p);
    std::array<int, 3> xs{}, ys{};
    const int kx = distinct_offsets(c.x, nx_, xs);
    const int ky = distinct_offsets(c.y, ny_, ys);
    for (int a = 0; a < ky; ++a)
      for (int b = 0; b < kx; ++b) {
        const std::size_t f = flat(xs[b], ys[a]);
        fn(std::span<const std::uint32_t>(items_).subspan(start_[f], start_[f + 1] - start_[f]));
      }
  }

 private:
  static int wrap(int v, int n) { return ((v % n) + n) % n; }

  static int distinct_offsets(int c, int n, std::array<int, 3>& out) {
    int k = 0;
    for (int d = -1; d <= 1; ++d) {
      const int v = wrap(c + d, n);
      if (std::find(out.begin(), out.begin() + k, v) == out.begin() + k) out[k++] = v;
    }
    return k;
  }

  std::size_t flat(int cx, int cy) const { return static_cast<std::size_t>(cy) * nx_ + cx; }

  world_type world_{};
  Real cell_size_{1};
  int nx_{1};
  int ny_{1};
  Real cell_w_{1};
  Real cell_h_{1};
  std::vector<std::uint32_t> start_;
  std::vector<std::uint32_t> items_;
};

using SpatialGrid = BasicSpatialGrid<float>;

template <std::floating_point Real>
BasicSpatialGrid<Real> build_grid(const BasicAgentStore<Real>& store, const BasicWorldSpec<Real>& world,
                                  Real cell_size) {
  return BasicSpatialGrid<Real>::build(store, world, cell_size);
}

/// Collects the neighbours j != i with torus distance < radius into `out`,
/// sorted by ascending j.
template <std::floating_point Real>
void gather_neighbors(const BasicSpatialGrid<Real>& grid, const BasicAgentStore<Real>& store, std::size_t i,
                      Real radius, std::vector<BasicNeighbor<Real>>& out) {
  if (radius > grid.cell_size())
    throw ConfigError("radius", "query radius " + std::to_string(radius) + " exceeds grid cell size " +
                                    std::to_string(grid.cell_size()));
  out.clear();
  const auto xs = store.x();
  const auto ys = store.y();
  const BasicVec2<Real> pi{xs[i], ys[i]};
  grid.for_each_stencil_cell(pi, [&](std::span<const std::uint32_t> cell) {
    for (std::uint32_t j : cell) {
      if (j == i) continue;
      const auto disp = torus_displacement(pi, BasicVec2<Real>{xs[j], ys[j]}, store.world());
      const Real d = disp.norm();
      if (d < radius) out.push_back({j, d, disp});
    }
  });
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.j < b.j; });
}

template <std::floating_point Real>
std::vector<BasicNeighbor<Real>> neighbors_within(const BasicSpatialGrid<Real>& grid,
                                                  const BasicAgentStore<Real>& store, std::size_t i, Real radius) {
  std::vector<BasicNeighbor<Real>> out;
  gather_neighbors(grid, store, i, radius, out);
  return out;
}

}  // namespace swarm

#endif  // SWARM_SPATIAL_GRID_HPP
