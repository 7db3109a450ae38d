#ifndef SWARM_TAG_HPP
#define SWARM_TAG_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
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

inline constexpr std::uint8_t kRunner = 0;
inline constexpr std::uint8_t kChaser = 1;

struct TagParams {
  std::size_t n_runners{450};
  std::size_t n_chasers{50};
  WorldSpec world{100.0f, 100.0f};
  float d_r{0.25f};
  ViewConfig view{.v = 64, .d_v = 10.0f, .channels = 2};
  float s_max_runner{0.5f};
  float s_max_chaser{0.375f};
  float theta_max{0.2f};
  float r_touch{1.0f};
  RewardShape proximity_shape{};
  float proximity_weight{0.1f};

  TagParams& sync() {
    view.d_r = d_r;
    view.channels = 2;
    proximity_shape.d_collide = 2.0f * d_r;
    return *this;
  }

  void validate() const {
    if (n_runners == 0) throw ConfigError("n_runners", "at least one runner is required");
    if (n_chasers == 0) throw ConfigError("n_chasers", "at least one chaser is required");
    world.validate();
    if (!(d_r > 0.0f)) throw ConfigError("d_r", "must be > 0");
    view.validate();
    if (!(s_max_runner > 0.0f)) throw ConfigError("s_max_runner", "must be > 0");
    if (!(s_max_chaser > 0.0f) || s_max_chaser > s_max_runner)
      throw ConfigError("s_max_chaser", "must lie in (0, s_max_runner]");
    if (!(theta_max > 0.0f) || theta_max > std::numbers::pi_v<float>) throw ConfigError("theta_max", "must lie in (0, pi]");
    if (!(r_touch >= 0.0f)) throw ConfigError("r_touch", "must be >= 0");
    if (!(proximity_weight >= 0.0f)) throw ConfigError("proximity_weight", "must be >= 0");
    if (!(2.0f * d_r < view.d_v)) throw ConfigError("d_v", "must exceed 2 * d_r");
    proximity_shape.validate(view.d_v);
  }

  std::size_t n() const { return n_runners + n_chasers; }
  std::size_t obs_dim() const { return 2 * static_cast<std::size_t>(view.v); }
};

/// Pursuit-evasion. Agents [0, n_runners) are runners, the rest chasers.
/// A touch is a runner-chaser pair closer than 2 d_r: the chaser gains
/// r_touch per touched runner and the runner loses r_touch per touching
/// chaser. Runners also collect proximity_weight * f(d) from every runner
/// in view range. Observation = runner channel then chaser channel, v each.
class TagEnv {
 public:
  explicit TagEnv(TagParams params, int workers = 1)
      : params_(std::move(params.sync())), workers_(workers), store_(0, params_.world) {
    params_.validate();
  }

  const TagParams& params() const { return params_; }
  std::size_t num_agents() const { return params_.n(); }
  std::size_t obs_dim() const { return params_.obs_dim(); }
  std::size_t num_groups() const { return 2; }
  std::size_t group_of(std::size_t i) const { return i < params_.n_runners ? kRunner : kChaser; }
  std::string group_name(std::size_t g) const { return g == kRunner ? "runner" : "chaser"; }
  ActionBox action_box(std::size_t g) const {
    const float s = g == kRunner ? params_.s_max_runner : params_.s_max_chaser;
    return {{-params_.theta_max, 0.0f}, {params_.theta_max, s}};
  }
  const EnvOutput& output() const { return out_; }
  const AgentStore& store() const { return store_; }
  const ViewBuffer& views() const { return views_; }
  void set_workers(int workers) { workers_ = workers; }

  /// Runner-chaser touching pairs in the most recent step.
  std::size_t touches() const { return touches_; }

  const EnvOutput& reset(std::uint64_t seed) {
    init_store();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> ux(0.0f, params_.world.width);
    std::uniform_real_distribution<float> uy(0.0f, params_.world.height);
    std::uniform_real_distribution<float> uh(0.0f, two_pi_v<float>);
    for (std::size_t i = 0; i < num_agents(); ++i) {
      const float x = ux(rng);
      const float y = uy(rng);
      const float h = uh(rng);
      store_.set_agent(i, {x, y}, h, 0.0f);
    }
    touches_ = 0;
    observe(false);
    return out_;
  }

  void restore(const EnvState& s) {
    if (s.x.size() != num_agents()) throw ContractError("tag restore: state has wrong agent count");
    init_store();
    for (std::size_t i = 0; i < num_agents(); ++i) store_.set_agent(i, {s.x[i], s.y[i]}, s.heading[i], s.speed[i]);
    observe(true);
  }

  /// actions: n x 2 row-major, column 0 rotation, column 1 distance moved.
  const EnvOutput& step(std::span<const float> actions) {
    const std::size_t n = num_agents();
    if (actions.size() != n * kActionDim)
      throw ContractError("tag step: expected " + std::to_string(n * kActionDim) + " action values, got " +
                          std::to_string(actions.size()));
    for (std::size_t i = 0; i < n; ++i) {
      const ActionBox box = action_box(group_of(i));
      const float r = actions[2 * i];
      const float m = actions[2 * i + 1];
      if (!(r >= box.lo[0] && r <= box.hi[0] && m >= box.lo[1] && m <= box.hi[1]))
        throw ContractError("tag step: action of agent " + std::to_string(i) + " outside bounds");
    }
    const AttributeId reward = reward_;
    const AttributeId touched = touched_;
    apply_self(
        store_,
        [&](const AgentRef& me, AgentWriter& w) {
          const std::size_t i = me.index();
          const float heading = me.heading() + actions[2 * i];
          const float dist = actions[2 * i + 1];
          w.set_heading(heading);
          w.set_speed(dist);
          w.set_position(me.position() + dist * Vec2{std::cos(heading), std::sin(heading)});
          w.set_attr(reward, 0.0f);
          w.set_attr(touched, 0.0f);
        },
        workers_);
    store_.commit();
    observe(true);
    return out_;
  }

 private:
  void init_store() {
    store_ = AgentStore(num_agents(), params_.world);
    for (std::size_t i = params_.n_runners; i < num_agents(); ++i) store_.set_type(i, kChaser);
    reward_ = store_.add_attribute("reward");
    touched_ = store_.add_attribute("touches");
  }

  void observe(bool with_rewards) {
    grid_ = build_grid(store_, params_.world, params_.view.query_radius());
    static constexpr int kChannels[] = {0, 1};
    compute_views(store_, grid_, params_.view, kChannels, views_, workers_);
    touches_ = 0;
    if (with_rewards) {
      const TagParams& p = params_;
      const AttributeId reward = reward_;
      const AttributeId touched = touched_;
      const float touch_range = 2.0f * p.d_r;
      apply_pairs(
          store_, grid_, p.view.d_v,
          [&](const AgentRef& me, const AgentRef& you, float d, Vec2, AgentWriter& w) {
            const bool touching = d < touch_range;
            if (me.type() == kRunner) {
              if (you.type() == kChaser) {
                if (touching) w.add_attr(reward, -p.r_touch);
              } else if (p.proximity_weight > 0.0f) {
                w.add_attr(reward, p.proximity_weight * flock_reward_f(d, p.proximity_shape, p.view.d_v));
              }
            } else if (you.type() == kRunner && touching) {
              w.add_attr(reward, p.r_touch);
              w.add_attr(touched, 1.0f);
            }
          },
          workers_);
      store_.commit();
      const auto t = store_.attribute_values(touched_);
      for (std::size_t i = params_.n_runners; i < num_agents(); ++i) touches_ += static_cast<std::size_t>(t[i]);
    }
    out_.resize(num_agents(), obs_dim());
    const auto rewards = store_.attribute_values(reward_);
    for (std::size_t i = 0; i < num_agents(); ++i) {
      auto row = views_.row(i);
      std::copy(row.begin(), row.end(), out_.observations.begin() + static_cast<std::ptrdiff_t>(i * out_.obs_dim));
      out_.rewards[i] = with_rewards ? rewards[i] : 0.0f;
    }
  }

  TagParams params_;
  int workers_;
  AgentStore store_;
  AttributeId reward_{0};
  AttributeId touched_{1};
  SpatialGrid grid_;
  ViewBuffer views_;
  EnvOutput out_;
  std::size_t touches_{0};
};

}  // namespace swarm

#endif  // SWARM_TAG_HPP
