#ifndef SWARM_FLOCK_HPP
#define SWARM_FLOCK_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>

#include "swarm/agent_store.hpp"
#include "swarm/env_common.hpp"
#include "swarm/error.hpp"
#include "swarm/geometry.hpp"
#include "swarm/interactions.hpp"
#include "swarm/perception.hpp"
#include "swarm/reward.hpp"
#include "swarm/spatial_grid.hpp"

namespace swarm {

struct FlockParams {
  std::size_t n{512};
  WorldSpec world{100.0f, 100.0f};
  float d_r{0.25f};
  ViewConfig view{.v = 128, .d_v = 10.0f, .channels = 1};
  float s_min{0.05f};
  float s_max{0.5f};
  float a_max{0.1f};
  float theta_max{0.2f};
  RewardShape reward_shape{};

  /// Copies the agent radius into the view and reward definitions.
  FlockParams& sync() {
    view.d_r = d_r;
    view.channels = 1;
    reward_shape.d_collide = 2.0f * d_r;
    return *this;
  }

  void validate() const {
    if (n == 0) throw ConfigError("n", "at least one agent is required");
    world.validate();
    if (!(d_r > 0.0f)) throw ConfigError("d_r", "must be > 0");
    view.validate();
    if (!(s_min >= 0.0f)) throw ConfigError("s_min", "must be >= 0");
    if (!(s_min < s_max)) throw ConfigError("s_max", "must exceed s_min");
    if (!(a_max > 0.0f)) throw ConfigError("a_max", "must be > 0");
    if (!(theta_max > 0.0f) || theta_max > std::numbers::pi_v<float>) throw ConfigError("theta_max", "must lie in (0, pi]");
    if (!(2.0f * d_r < view.d_v)) throw ConfigError("d_v", "must exceed 2 * d_r");
    reward_shape.validate(view.d_v);
  }

  std::size_t obs_dim() const { return static_cast<std::size_t>(view.v) + 1; }
};

/// Speed after applying acceleration a, clamped to [s_min, s_max].
inline float update_speed(float s, float a, const FlockParams& p) { return std::clamp(s + a, p.s_min, p.s_max); }

/// Flocking: every agent accelerates and turns, then is rewarded by
/// sum_j f(d_ij) over neighbours closer than d_v. Observation = 128 sector
/// distances followed by speed / s_max.
class FlockEnv {
 public:
  explicit FlockEnv(FlockParams params, int workers = 1)
      : params_(std::move(params.sync())), workers_(workers), store_(0, params_.world) {
    params_.validate();
  }

  const FlockParams& params() const { return params_; }
  std::size_t num_agents() const { return params_.n; }
  std::size_t obs_dim() const { return params_.obs_dim(); }
  std::size_t num_groups() const { return 1; }
  std::size_t group_of(std::size_t) const { return 0; }
  std::string group_name(std::size_t) const { return "flock"; }
  ActionBox action_box(std::size_t) const {
    return {{-params_.a_max, -params_.theta_max}, {params_.a_max, params_.theta_max}};
  }
  const EnvOutput& output() const { return out_; }
  const AgentStore& store() const { return store_; }
  const ViewBuffer& views() const { return views_; }
  const SpatialGrid& grid() const { return grid_; }
  void set_workers(int workers) { workers_ = workers; }

  const EnvOutput& reset(std::uint64_t seed) {
    init_store();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> ux(0.0f, params_.world.width);
    std::uniform_real_distribution<float> uy(0.0f, params_.world.height);
    std::uniform_real_distribution<float> uh(0.0f, two_pi_v<float>);
    const float s0 = 0.5f * (params_.s_min + params_.s_max);
    for (std::size_t i = 0; i < params_.n; ++i) {
      const float x = ux(rng);
      const float y = uy(rng);
      const float h = uh(rng);
      store_.set_agent(i, {x, y}, h, s0);
    }
    observe(false);
    return out_;
  }

  void restore(const EnvState& s) {
    if (s.x.size() != params_.n) throw ContractError("flock restore: state has wrong agent count");
    init_store();
    for (std::size_t i = 0; i < params_.n; ++i) store_.set_agent(i, {s.x[i], s.y[i]}, s.heading[i], s.speed[i]);
    observe(true);
  }

  /// actions: n x 2 row-major, column 0 acceleration, column 1 rotation.
  const EnvOutput& step(std::span<const float> actions) {
    if (actions.size() != params_.n * kActionDim)
      throw ContractError("flock step: expected " + std::to_string(params_.n * kActionDim) + " action values, got " +
                          std::to_string(actions.size()));
    for (std::size_t i = 0; i < params_.n; ++i) {
      const float a = actions[2 * i];
      const float r = actions[2 * i + 1];
      if (!(std::abs(a) <= params_.a_max) || !(std::abs(r) <= params_.theta_max))
        throw ContractError("flock step: action of agent " + std::to_string(i) + " outside bounds");
    }
    const FlockParams& p = params_;
    const AttributeId reward = reward_;
    apply_self(
        store_,
        [&](const AgentRef& me, AgentWriter& w) {
          const std::size_t i = me.index();
          const float heading = me.heading() + actions[2 * i + 1];
          const float speed = update_speed(me.speed(), actions[2 * i], p);
          w.set_heading(heading);
          w.set_speed(speed);
          w.set_position(me.position() + speed * Vec2{std::cos(heading), std::sin(heading)});
          w.set_attr(reward, 0.0f);
        },
        workers_);
    store_.commit();
    observe(true);
    return out_;
  }

 private:
  void init_store() {
    store_ = AgentStore(params_.n, params_.world);
    reward_ = store_.add_attribute("reward");
  }

  void observe(bool with_rewards) {
    grid_ = build_grid(store_, params_.world, params_.view.query_radius());
    static constexpr int kChannels[] = {0};
    compute_views(store_, grid_, params_.view, kChannels, views_, workers_);
    if (with_rewards) {
      const FlockParams& p = params_;
      const AttributeId reward = reward_;
      apply_pairs(
          store_, grid_, p.view.d_v,
          [&](const AgentRef&, const AgentRef&, float d, Vec2, AgentWriter& w) {
            w.add_attr(reward, flock_reward_f(d, p.reward_shape, p.view.d_v));
          },
          workers_);
      store_.commit();
    }
    out_.resize(params_.n, obs_dim());
    const auto v = static_cast<std::size_t>(params_.view.v);
    for (std::size_t i = 0; i < params_.n; ++i) {
      auto row = views_.row(i);
      float* o = out_.observations.data() + i * out_.obs_dim;
      std::copy(row.begin(), row.end(), o);
      o[v] = store_.speed()[i] / params_.s_max;
      out_.rewards[i] = with_rewards ? store_.attribute_values(reward_)[i] : 0.0f;
    }
  }

  FlockParams params_;
  int workers_;
  AgentStore store_;
  AttributeId reward_{0};
  SpatialGrid grid_;
  ViewBuffer views_;
  EnvOutput out_;
};

/// Mean distance from each agent to its nearest neighbour (brute force
/// over the torus).
inline double mean_nearest_neighbor_distance(const AgentStore& store) {
  const std::size_t n = store.size();
  if (n < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    float best = std::numeric_limits<float>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      best = std::min(best, torus_displacement(store.position(i), store.position(j), store.world()).norm());
    }
    total += best;
  }
  return total / static_cast<double>(n);
}

}  // namespace swarm

#endif  // SWARM_FLOCK_HPP
