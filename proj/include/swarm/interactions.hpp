#ifndef SWARM_INTERACTIONS_HPP
#define SWARM_INTERACTIONS_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <string>
#include <vector>

#include "swarm/agent_store.hpp"
#include "swarm/error.hpp"
#include "swarm/parallel.hpp"
#include "swarm/spatial_grid.hpp"

namespace swarm {

template <std::floating_point Real>
struct BasicEdge {
  std::uint32_t src;
  std::uint32_t dst;
  Real weight;
};

/// Directed weighted edges sorted by (src, dst) with no duplicates.
template <std::floating_point Real>
class BasicEdgeList {
 public:
  using edge_type = BasicEdge<Real>;

  BasicEdgeList() = default;

  /// Sorts the edges; throws on duplicates or negative weights.
  explicit BasicEdgeList(std::vector<edge_type> edges) : edges_(std::move(edges)) {
    std::sort(edges_.begin(), edges_.end(),
              [](const edge_type& a, const edge_type& b) { return a.src != b.src ? a.src < b.src : a.dst < b.dst; });
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      if (!(edges_[k].weight >= Real(0)))
        throw InvariantViolation("edge " + std::to_string(k) + " has negative weight");
      if (k > 0 && edges_[k].src == edges_[k - 1].src && edges_[k].dst == edges_[k - 1].dst)
        throw InvariantViolation("duplicate edge (" + std::to_string(edges_[k].src) + ", " +
                                 std::to_string(edges_[k].dst) + ")");
    }
  }

  const std::vector<edge_type>& edges() const { return edges_; }
  std::size_t size() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }

  /// Throws unless every endpoint is a valid index for n agents.
  void check(std::size_t n) const {
    for (const auto& e : edges_)
      if (e.src >= n || e.dst >= n)
        throw InvariantViolation("dangling edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) +
                                 ") for " + std::to_string(n) + " agents");
  }

 private:
  std::vector<edge_type> edges_;
};

using Edge = BasicEdge<float>;
using EdgeList = BasicEdgeList<float>;

namespace detail {

template <class Fn>
void guarded(std::size_t agent, Fn&& fn) {
  try {
    fn();
  } catch (const InteractionError&) {
    throw;
  } catch (const std::exception& e) {
    throw InteractionError(agent, e.what());
  } catch (...) {
    throw InteractionError(agent, "unknown exception");
  }
}

}  // namespace detail

/// Self interaction: f(read view, writer) once per agent.
template <std::floating_point Real, class Fn>
void apply_self(BasicAgentStore<Real>& store, Fn&& f, int workers = 1) {
  parallel_for(store.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      detail::guarded(i, [&] {
        auto w = store.writer(i);
        f(store.agent(i), w);
      });
    }
  });
}

/// Spatial pair interaction: for every ordered pair (i, j) with torus
/// distance < radius, f(me, you, d_ij, disp, writer of me). The calls for
/// agent i run in ascending j; no call writes to j.
template <std::floating_point Real, class Fn>
void apply_pairs(BasicAgentStore<Real>& store, const BasicSpatialGrid<Real>& grid, Real radius, Fn&& f,
                 int workers = 1) {
  if (radius > grid.cell_size())
    throw ConfigError("radius", "query radius " + std::to_string(radius) + " exceeds grid cell size " +
                                    std::to_string(grid.cell_size()));
  parallel_for(store.size(), workers, [&](std::size_t begin, std::size_t end) {
    std::vector<BasicNeighbor<Real>> scratch;
    for (std::size_t i = begin; i < end; ++i) {
      gather_neighbors(grid, store, i, radius, scratch);
      detail::guarded(i, [&] {
        auto w = store.writer(i);
        const auto me = store.agent(i);
        for (const auto& nb : scratch) f(me, store.agent(nb.j), nb.distance, nb.disp, w);
      });
    }
  });
}

/// Graph interaction: f(me = src, you = dst, weight, writer of src) once per
/// edge, accumulating into each source in edge order.
template <std::floating_point Real, class Fn>
void apply_graph(BasicAgentStore<Real>& store, const BasicEdgeList<Real>& edges, Fn&& f, int workers = 1) {
  const std::size_t n = store.size();
  edges.check(n);
  const auto& list = edges.edges();
  std::vector<std::size_t> first(n + 1, 0);
  for (const auto& e : list) ++first[e.src + 1];
  for (std::size_t i = 1; i <= n; ++i) first[i] += first[i - 1];
  parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (first[i] == first[i + 1]) continue;
      detail::guarded(i, [&] {
        auto w = store.writer(i);
        const auto me = store.agent(i);
        for (std::size_t k = first[i]; k < first[i + 1]; ++k) f(me, store.agent(list[k].dst), list[k].weight, w);
      });
    }
  });
}

template <std::floating_point Real>
void commit(BasicAgentStore<Real>& store) {
  store.commit();
}

}  // namespace swarm

#endif  // SWARM_INTERACTIONS_HPP
