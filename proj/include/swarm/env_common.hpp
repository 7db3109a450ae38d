#ifndef SWARM_ENV_COMMON_HPP
#define SWARM_ENV_COMMON_HPP

#include <array>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "swarm/agent_store.hpp"
#include "swarm/csv.hpp"

namespace swarm {

inline constexpr std::size_t kActionDim = 2;

/// Observations (n x obs_dim, row-major) and rewards of one environment step.
struct EnvOutput {
  std::size_t n{0};
  std::size_t obs_dim{0};
  std::vector<float> observations;
  std::vector<float> rewards;

  std::span<const float> observation(std::size_t i) const {
    return std::span<const float>(observations).subspan(i * obs_dim, obs_dim);
  }

  void resize(std::size_t agents, std::size_t dim) {
    n = agents;
    obs_dim = dim;
    observations.assign(agents * dim, 0.0f);
    rewards.assign(agents, 0.0f);
  }
};

/// Per-dimension action bounds [lo, hi].
struct ActionBox {
  std::array<float, kActionDim> lo{};
  std::array<float, kActionDim> hi{};
};

/// Agent state captured for checkpoints; enough to rebuild observations.
struct EnvState {
  std::vector<float> x, y, heading, speed;
};

inline EnvState capture_state(const AgentStore& store) {
  EnvState s;
  s.x.assign(store.x().begin(), store.x().end());
  s.y.assign(store.y().begin(), store.y().end());
  s.heading.assign(store.heading().begin(), store.heading().end());
  s.speed.assign(store.speed().begin(), store.speed().end());
  return s;
}

/// Environment contract used by rollout collection. Agents are partitioned
/// into policy groups; all agents of one group share a policy and bounds.
template <class E>
concept MultiAgentEnv = requires(E& e, const E& ce, std::span<const float> actions, std::uint64_t seed,
                                 std::size_t i) {
  { ce.num_agents() } -> std::convertible_to<std::size_t>;
  { ce.obs_dim() } -> std::convertible_to<std::size_t>;
  { ce.num_groups() } -> std::convertible_to<std::size_t>;
  { ce.group_of(i) } -> std::convertible_to<std::size_t>;
  { ce.group_name(i) } -> std::convertible_to<std::string>;
  { ce.action_box(i) } -> std::same_as<ActionBox>;
  { ce.output() } -> std::same_as<const EnvOutput&>;
  { ce.store() } -> std::same_as<const AgentStore&>;
  { e.reset(seed) } -> std::same_as<const EnvOutput&>;
  { e.step(actions) } -> std::same_as<const EnvOutput&>;
};

inline constexpr std::string_view kSnapshotHeader = "step,agent,type,x,y,heading,speed,reward";

/// Appends one snapshot row per agent: step,agent,type,x,y,heading,speed,reward.
inline void write_snapshot_rows(std::ostream& out, std::int64_t step, const AgentStore& store,
                                std::span<const float> rewards) {
  csv::Writer w(out);
  for (std::size_t i = 0; i < store.size(); ++i) {
    w.field(step)
        .field(i)
        .field(static_cast<int>(store.types()[i]))
        .field(store.x()[i])
        .field(store.y()[i])
        .field(store.heading()[i])
        .field(store.speed()[i])
        .field(rewards[i])
        .end_row();
  }
}

}  // namespace swarm

#endif  // SWARM_ENV_COMMON_HPP
