#ifndef SWARM_OPINION_HPP
#define SWARM_OPINION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "swarm/agent_store.hpp"
#include "swarm/error.hpp"
#include "swarm/interactions.hpp"

namespace swarm {

/// Bounded-confidence opinion dynamics on a weighted graph. Each step runs
/// a graph interaction pulling new_opinion towards every neighbour whose
/// opinion differs by less than `threshold`, then a self interaction that
/// publishes new_opinion as opinion.
class OpinionModel {
 public:
  using Store = BasicAgentStore<double>;

  OpinionModel(std::vector<double> opinions, BasicEdgeList<double> edges, double threshold, double strength)
      : store_(opinions.size(), BasicWorldSpec<double>{1.0, 1.0}),
        edges_(std::move(edges)),
        threshold_(threshold),
        strength_(strength) {
    if (opinions.empty()) throw ConfigError("n", "at least one agent is required");
    if (!(threshold >= 0.0)) throw ConfigError("threshold", "must be >= 0");
    if (!(strength >= 0.0)) throw ConfigError("strength", "must be >= 0");
    edges_.check(opinions.size());
    for (const auto& e : edges_.edges())
      if (strength * e.weight > 1.0) throw ConfigError("strength", "strength * weight must not exceed 1");
    opinion_ = store_.add_attribute("opinion");
    new_opinion_ = store_.add_attribute("new_opinion");
    for (std::size_t i = 0; i < opinions.size(); ++i) {
      store_.set_attribute(opinion_, i, opinions[i]);
      store_.set_attribute(new_opinion_, i, opinions[i]);
    }
  }

  std::size_t size() const { return store_.size(); }
  double threshold() const { return threshold_; }
  double strength() const { return strength_; }
  const BasicEdgeList<double>& edges() const { return edges_; }
  std::span<const double> opinions() const { return store_.attribute_values(opinion_); }
  std::span<const double> new_opinions() const { return store_.attribute_values(new_opinion_); }

  double spread() const {
    const auto o = opinions();
    const auto [lo, hi] = std::minmax_element(o.begin(), o.end());
    return *hi - *lo;
  }

  void step(int workers = 1) {
    const AttributeId op = opinion_;
    const AttributeId next = new_opinion_;
    const double threshold = threshold_;
    const double strength = strength_;
    apply_graph(
        store_, edges_,
        [&](const BasicAgentRef<double>& me, const BasicAgentRef<double>& you, double weight,
            BasicAgentWriter<double>& w) {
          const double d = std::abs(me.attr(op) - you.attr(op));
          if (d < threshold) {
            const double s = strength * weight;
            w.set_attr(next, (1.0 - s) * w.attr(next) + s * you.attr(op));
          }
        },
        workers);
    store_.commit();
    apply_self(
        store_, [&](const BasicAgentRef<double>& me, BasicAgentWriter<double>& w) { w.set_attr(op, me.attr(next)); },
        workers);
    store_.commit();
  }

 private:
  Store store_;
  BasicEdgeList<double> edges_;
  double threshold_;
  double strength_;
  AttributeId opinion_{0};
  AttributeId new_opinion_{1};
};

inline void opinion_step(OpinionModel& model, int workers = 1) { model.step(workers); }

/// Directed complete graph (every ordered pair i != j) with uniform weight.
inline BasicEdgeList<double> complete_graph(std::size_t n, double weight) {
  std::vector<BasicEdge<double>> edges;
  edges.reserve(n * (n > 0 ? n - 1 : 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), weight});
  return BasicEdgeList<double>(std::move(edges));
}

/// Erdos-Renyi style directed graph: each ordered pair kept with probability p.
inline BasicEdgeList<double> random_graph(std::size_t n, double p, double weight, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(p);
  std::vector<BasicEdge<double>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && keep(rng)) edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), weight});
  return BasicEdgeList<double>(std::move(edges));
}

}  // namespace swarm

#endif  // SWARM_OPINION_HPP
