#ifndef SWARM_TRAINER_HPP
#define SWARM_TRAINER_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "swarm/env_common.hpp"
#include "swarm/error.hpp"
#include "swarm/mlp.hpp"
#include "swarm/parallel.hpp"
#include "swarm/ppo.hpp"

namespace swarm {

using Policy = ActorCritic<float>;

/// Scales rewards by the running standard deviation of each agent's
/// discounted return, so value targets stay O(1) whatever the reward
/// magnitude. Statistics use Chan's parallel update in double precision.
struct RewardScaler {
  std::vector<double> running_return;  // one accumulator per member agent
  double mean{0};
  double var{1};
  double count{1e-4};

  double scale() const { return 1.0 / (std::sqrt(var) + 1e-8); }

  /// rewards: time-major t x n; updates statistics, then rescales in place.
  void apply(Eigen::VectorXf& rewards, std::size_t n, std::size_t t, double gamma) {
    if (running_return.size() != n) running_return.assign(n, 0.0);
    double batch_mean = 0, batch_m2 = 0;
    std::size_t k_count = 0;
    for (std::size_t k = 0; k < t; ++k)
      for (std::size_t a = 0; a < n; ++a) {
        double& g = running_return[a];
        g = g * gamma + static_cast<double>(rewards(static_cast<Eigen::Index>(k * n + a)));
        ++k_count;
        const double delta = g - batch_mean;
        batch_mean += delta / static_cast<double>(k_count);
        batch_m2 += delta * (g - batch_mean);
      }
    if (k_count == 0) return;
    const auto bc = static_cast<double>(k_count);
    const double delta = batch_mean - mean;
    const double total = count + bc;
    const double m2 = var * count + batch_m2 + delta * delta * count * bc / total;
    mean += delta * bc / total;
    var = m2 / total;
    count = total;
    rewards *= static_cast<float>(scale());
  }
};

/// One shared policy with its optimiser and the agents that act with it.
struct PolicySlot {
  std::string name;
  Policy policy;
  AdamState<float> adam;
  std::vector<std::uint32_t> members;
  ActionBox box;
  RewardScaler reward_scaler;
};

/// Everything needed to continue training bit-for-bit.
struct TrainingState {
  std::vector<PolicySlot> slots;
  std::mt19937_64 rng;
  std::int64_t step{0};
};

struct GroupMetrics {
  std::string name;
  double mean_reward{0};
  double policy_loss{0};
  double value_loss{0};
  double entropy{0};
  double clip_fraction{0};
  std::size_t samples_used{0};
  std::size_t minibatches{0};
};

struct MetricsRow {
  std::int64_t training_step{0};
  double wall_ms_env{0};
  double wall_ms_update{0};
  double mean_reward{0};
  double policy_loss{0};
  double value_loss{0};
  double entropy{0};
  double clip_fraction{0};
  std::vector<GroupMetrics> groups;
};

/// Columns per fixed chunk when evaluating policies during rollouts.
inline constexpr std::size_t kForwardChunk = 256;
/// Samples per fixed chunk when computing minibatch gradients.
inline constexpr std::size_t kGradientChunk = 128;

/// Initial log std per action dimension: log of half the bound width.
inline std::vector<float> default_log_std(const ActionBox& box) {
  std::vector<float> out(kActionDim);
  for (std::size_t d = 0; d < kActionDim; ++d) out[d] = std::log(0.5f * (box.hi[d] - box.lo[d]));
  return out;
}

/// One slot per policy group of the environment, parameters initialised
/// from cfg.seed.
template <MultiAgentEnv Env>
TrainingState make_training_state(const Env& env, const PPOConfig& cfg) {
  cfg.validate();
  TrainingState s;
  s.rng.seed(cfg.seed);
  s.slots.resize(env.num_groups());
  for (std::size_t g = 0; g < env.num_groups(); ++g) {
    PolicySlot& slot = s.slots[g];
    slot.name = env.group_name(g);
    slot.box = env.action_box(g);
    slot.policy = Policy(static_cast<int>(env.obs_dim()), static_cast<int>(kActionDim), cfg.hidden);
    const auto ls = default_log_std(slot.box);
    slot.policy.initialize(s.rng, ls);
    slot.adam = AdamState<float>::zeros(slot.policy.parameter_count());
  }
  for (std::size_t i = 0; i < env.num_agents(); ++i)
    s.slots[env.group_of(i)].members.push_back(static_cast<std::uint32_t>(i));
  return s;
}

namespace detail {

/// Copies the observations of `members` into columns [col0, col0 + members).
inline void gather_observations(const EnvOutput& out, const std::vector<std::uint32_t>& members,
                                Eigen::MatrixXf& dst, Eigen::Index col0) {
  for (std::size_t a = 0; a < members.size(); ++a) {
    const auto row = out.observation(members[a]);
    dst.col(col0 + static_cast<Eigen::Index>(a)) = Eigen::Map<const Eigen::VectorXf>(row.data(), static_cast<Eigen::Index>(row.size()));
  }
}

/// Evaluates the policy on every column of obs in fixed chunks.
inline void evaluate(const Policy& policy, const Eigen::Ref<const Eigen::MatrixXf>& obs, Eigen::MatrixXf& mean,
                     Eigen::RowVectorXf& value, int workers) {
  const auto cols = static_cast<std::size_t>(obs.cols());
  mean.resize(policy.action_dim(), obs.cols());
  value.resize(obs.cols());
  parallel_chunks(cols, kForwardChunk, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    Policy::Activations act;
    const auto b0 = static_cast<Eigen::Index>(begin);
    const auto len = static_cast<Eigen::Index>(end - begin);
    policy.forward(obs.middleCols(b0, len), act);
    mean.middleCols(b0, len) = act.mean;
    value.segment(b0, len) = act.value;
  });
}

}  // namespace detail

enum class ActionMode { sample, mean };

/// Actions for the current observations. In mean mode the policy mean is
/// clipped into bounds and no randomness is consumed.
template <MultiAgentEnv Env>
std::vector<float> policy_actions(const Env& env, TrainingState& state, ActionMode mode, int workers = 1) {
  std::vector<float> actions(env.num_agents() * kActionDim);
  for (auto& slot : state.slots) {
    if (slot.members.empty()) continue;
    Eigen::MatrixXf obs(static_cast<Eigen::Index>(env.obs_dim()), static_cast<Eigen::Index>(slot.members.size()));
    detail::gather_observations(env.output(), slot.members, obs, 0);
    Eigen::MatrixXf mean, raw;
    Eigen::RowVectorXf value;
    Eigen::VectorXf lp;
    detail::evaluate(slot.policy, obs, mean, value, workers);
    const Eigen::MatrixXf* src = &mean;
    if (mode == ActionMode::sample) {
      sample_action(mean, slot.policy.log_std(), state.rng, raw, lp);
      src = &raw;
    }
    for (std::size_t a = 0; a < slot.members.size(); ++a) {
      const float r[kActionDim] = {(*src)(0, static_cast<Eigen::Index>(a)), (*src)(1, static_cast<Eigen::Index>(a))};
      squash_action(r, slot.box, std::span<float>(actions).subspan(slot.members[a] * kActionDim, kActionDim));
    }
  }
  return actions;
}

/// Runs t environment steps with actions sampled from each slot's policy
/// and records one trajectory buffer per slot. Parameters are read-only
/// for the whole rollout.
template <MultiAgentEnv Env>
std::vector<TrajectoryBuffer> collect_rollout(Env& env, TrainingState& state, std::size_t t, int workers = 1) {
  const std::size_t obs_dim = env.obs_dim();
  std::vector<TrajectoryBuffer> bufs;
  bufs.reserve(state.slots.size());
  for (const auto& slot : state.slots) bufs.emplace_back(slot.members.size(), t, obs_dim, kActionDim);
  std::vector<float> actions(env.num_agents() * kActionDim);
  Eigen::MatrixXf mean, raw;
  Eigen::RowVectorXf value;
  Eigen::VectorXf lp;

  for (std::size_t k = 0; k <= t; ++k) {
    const EnvOutput& out = env.output();
    for (std::size_t g = 0; g < state.slots.size(); ++g) {
      PolicySlot& slot = state.slots[g];
      TrajectoryBuffer& buf = bufs[g];
      const std::size_t n = slot.members.size();
      if (n == 0) continue;
      const auto col0 = static_cast<Eigen::Index>(k * n);
      const auto cols = static_cast<Eigen::Index>(n);
      if (k == t) {
        // bootstrap values for the state after the last step
        Eigen::MatrixXf obs(static_cast<Eigen::Index>(obs_dim), cols);
        detail::gather_observations(out, slot.members, obs, 0);
        detail::evaluate(slot.policy, obs, mean, value, workers);
        buf.values.segment(col0, cols) = value.transpose();
        continue;
      }
      detail::gather_observations(out, slot.members, buf.observations, col0);
      detail::evaluate(slot.policy, buf.observations.middleCols(col0, cols), mean, value, workers);
      buf.values.segment(col0, cols) = value.transpose();
      sample_action(mean, slot.policy.log_std(), state.rng, raw, lp);
      buf.actions.middleCols(col0, cols) = raw;
      buf.log_probs.segment(col0, cols) = lp;
      for (std::size_t a = 0; a < n; ++a) {
        const float r[kActionDim] = {raw(0, static_cast<Eigen::Index>(a)), raw(1, static_cast<Eigen::Index>(a))};
        squash_action(r, slot.box, std::span<float>(actions).subspan(slot.members[a] * kActionDim, kActionDim));
      }
    }
    if (k == t) break;
    const EnvOutput& next = env.step(actions);
    for (std::size_t g = 0; g < state.slots.size(); ++g) {
      const auto& members = state.slots[g].members;
      for (std::size_t a = 0; a < members.size(); ++a) bufs[g].rewards(bufs[g].index(a, k)) = next.rewards[members[a]];
    }
  }
  return bufs;
}

/// The sample indices each minibatch draws within one training step:
/// p epochs of b = min(floor(m / |b|), b_max) minibatches of |b| indices
/// taken from a fresh permutation of [0, m).
inline std::vector<std::vector<std::uint32_t>> minibatch_plan(std::size_t m, const PPOConfig& cfg,
                                                              std::mt19937_64& rng) {
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  if (m < bs)
    throw ConfigError("batch_size", "rollout has " + std::to_string(m) + " samples, fewer than one minibatch of " +
                                        std::to_string(bs));
  const std::size_t b = minibatches_per_epoch(m, cfg);
  std::vector<std::vector<std::uint32_t>> plan;
  plan.reserve(static_cast<std::size_t>(cfg.p) * b);
  std::vector<std::uint32_t> perm(m);
  for (int epoch = 0; epoch < cfg.p; ++epoch) {
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t k = 0; k < b; ++k) plan.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(k * bs),
                                                          perm.begin() + static_cast<std::ptrdiff_t>((k + 1) * bs));
  }
  return plan;
}

/// PPO update of one slot from its (GAE-processed) buffer.
inline GroupMetrics update_slot(PolicySlot& slot, const TrajectoryBuffer& buf, const PPOConfig& cfg,
                                std::mt19937_64& rng, int workers) {
  GroupMetrics gm;
  gm.name = slot.name;
  gm.mean_reward = buf.samples() ? static_cast<double>(buf.rewards.template cast<double>().mean()) : 0.0;
  const auto plan = minibatch_plan(buf.samples(), cfg, rng);
  const LossCoefficients coef{cfg.clip, cfg.value_coef, cfg.entropy_coef};
  const AdamHyper hyper{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  Minibatch<float> mb;
  const auto bs = static_cast<Eigen::Index>(cfg.batch_size);
  mb.observations.resize(buf.observations.rows(), bs);
  mb.actions.resize(buf.actions.rows(), bs);
  mb.old_log_probs.resize(bs);
  mb.advantages.resize(bs);
  mb.returns.resize(bs);
  for (const auto& indices : plan) {
    for (Eigen::Index k = 0; k < bs; ++k) {
      const Eigen::Index s = indices[static_cast<std::size_t>(k)];
      mb.observations.col(k) = buf.observations.col(s);
      mb.actions.col(k) = buf.actions.col(s);
      mb.old_log_probs(k) = buf.log_probs(s);
      mb.advantages(k) = buf.advantages(s);
      mb.returns(k) = buf.returns(s);
    }
    normalize_advantages(mb.advantages);
    const auto r = ppo_loss(slot.policy, mb, coef, workers, kGradientChunk);
    adam_update(slot.policy.parameters(), r.grad, slot.adam, hyper);
    slot.policy.clamp_log_std();
    gm.policy_loss += r.policy_loss;
    gm.value_loss += r.value_loss;
    gm.entropy += r.entropy;
    gm.clip_fraction += r.clip_fraction;
    gm.samples_used += indices.size();
    ++gm.minibatches;
  }
  if (gm.minibatches > 0) {
    const auto k = static_cast<double>(gm.minibatches);
    gm.policy_loss /= k;
    gm.value_loss /= k;
    gm.entropy /= k;
    gm.clip_fraction /= k;
  }
  return gm;
}

/// One training step: rollout of cfg.t steps, GAE, then cfg.p epochs of
/// minibatch PPO updates for every slot.
template <MultiAgentEnv Env>
MetricsRow train_step(Env& env, TrainingState& state, const PPOConfig& cfg, int workers = 1) {
  using clock = std::chrono::steady_clock;
  // fail before spending time on the rollout
  for (const auto& slot : state.slots)
    if (slot.members.size() * static_cast<std::size_t>(cfg.t) < static_cast<std::size_t>(cfg.batch_size))
      throw ConfigError("batch_size", "policy '" + slot.name + "' collects " +
                                          std::to_string(slot.members.size() * static_cast<std::size_t>(cfg.t)) +
                                          " samples per step, fewer than batch_size " + std::to_string(cfg.batch_size));
  const auto t0 = clock::now();
  auto bufs = collect_rollout(env, state, static_cast<std::size_t>(cfg.t), workers);
  const auto t1 = clock::now();
  MetricsRow row;
  row.training_step = ++state.step;
  double reward_sum = 0;
  std::size_t reward_count = 0;
  std::size_t sample_total = 0;
  for (std::size_t g = 0; g < state.slots.size(); ++g) {
    const double raw_mean = bufs[g].samples() ? bufs[g].rewards.template cast<double>().mean() : 0.0;
    if (cfg.normalize_rewards)
      state.slots[g].reward_scaler.apply(bufs[g].rewards, bufs[g].n, bufs[g].t, cfg.gamma);
    gae(bufs[g], static_cast<float>(cfg.gamma), static_cast<float>(cfg.lambda));
    GroupMetrics gm = update_slot(state.slots[g], bufs[g], cfg, state.rng, workers);
    gm.mean_reward = raw_mean;
    reward_sum += gm.mean_reward * static_cast<double>(bufs[g].samples());
    reward_count += bufs[g].samples();
    const auto w = static_cast<double>(gm.samples_used);
    row.policy_loss += gm.policy_loss * w;
    row.value_loss += gm.value_loss * w;
    row.entropy += gm.entropy * w;
    row.clip_fraction += gm.clip_fraction * w;
    sample_total += gm.samples_used;
    row.groups.push_back(std::move(gm));
  }
  const auto t2 = clock::now();
  row.mean_reward = reward_count ? reward_sum / static_cast<double>(reward_count) : 0.0;
  if (sample_total > 0) {
    const auto w = static_cast<double>(sample_total);
    row.policy_loss /= w;
    row.value_loss /= w;
    row.entropy /= w;
    row.clip_fraction /= w;
  }
  row.wall_ms_env = std::chrono::duration<double, std::milli>(t1 - t0).count();
  row.wall_ms_update = std::chrono::duration<double, std::milli>(t2 - t1).count();
  return row;
}

/// cfg.T training steps; on_step (if set) sees every row as it is produced.
template <MultiAgentEnv Env>
std::vector<MetricsRow> train(Env& env, TrainingState& state, const PPOConfig& cfg, int workers = 1,
                              const std::function<void(const MetricsRow&)>& on_step = {}) {
  std::vector<MetricsRow> history;
  history.reserve(static_cast<std::size_t>(cfg.T));
  for (int k = 0; k < cfg.T; ++k) {
    history.push_back(train_step(env, state, cfg, workers));
    if (on_step) on_step(history.back());
  }
  return history;
}

}  // namespace swarm

#endif  // SWARM_TRAINER_HPP
