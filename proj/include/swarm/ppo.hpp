#ifndef SWARM_PPO_HPP
#define SWARM_PPO_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "swarm/env_common.hpp"
#include "swarm/error.hpp"
#include "swarm/mlp.hpp"
#include "swarm/parallel.hpp"

namespace swarm {

struct PPOConfig {
  int T{200};           // training steps per run
  int t{128};           // environment steps per training step
  int p{2};             // epochs over each rollout
  int batch_size{512};  // samples per minibatch
  int b_max{512};       // cap on minibatches per epoch
  double gamma{0.99};
  double lambda{0.95};
  double clip{0.2};
  double lr{3e-4};
  double adam_beta1{0.9};
  double adam_beta2{0.999};
  double adam_eps{1e-8};
  double value_coef{0.5};
  double entropy_coef{0.0};
  int hidden{64};
  bool normalize_rewards{true};
  std::uint64_t seed{0};

  void validate() const {
    if (T < 1) throw ConfigError("T", "must be >= 1");
    if (t < 1) throw ConfigError("t", "must be >= 1");
    if (p < 1) throw ConfigError("p", "must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
    if (b_max < 1) throw ConfigError("b_max", "must be >= 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma", "must lie in [0, 1]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda", "must lie in [0, 1]");
    if (!(clip > 0.0)) throw ConfigError("clip", "must be > 0");
    if (!(lr >= 0.0)) throw ConfigError("lr", "must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1", "must lie in [0, 1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2", "must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps", "must be > 0");
    if (!(value_coef >= 0.0)) throw ConfigError("value_coef", "must be >= 0");
    if (!(entropy_coef >= 0.0)) throw ConfigError("entropy_coef", "must be >= 0");
    if (hidden < 1) throw ConfigError("hidden", "must be >= 1");
  }
};

/// Minibatches per epoch for m samples: min(floor(m / batch_size), b_max).
inline std::size_t minibatches_per_epoch(std::size_t m, const PPOConfig& cfg) {
  return std::min(m / static_cast<std::size_t>(cfg.batch_size), static_cast<std::size_t>(cfg.b_max));
}

template <class Scalar>
inline constexpr Scalar kHalfLog2Pi = Scalar(0.91893853320467274178032973640562);

/// Log density of a diagonal Gaussian, summed over dimensions.
template <class Scalar>
Scalar gaussian_log_prob(std::span<const Scalar> x, std::span<const Scalar> mean, std::span<const Scalar> log_std) {
  Scalar lp = 0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const Scalar z = (x[d] - mean[d]) / std::exp(log_std[d]);
    lp += Scalar(-0.5) * z * z - log_std[d] - kHalfLog2Pi<Scalar>;
  }
  return lp;
}

/// Draws one action per column of `mean` (action_dim x batch) from
/// Normal(mean, exp(log_std)); fills `raw` and the summed log density.
template <class Scalar, class Rng>
void sample_action(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& mean,
                   const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& log_std, Rng& rng,
                   Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& raw,
                   Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& log_prob) {
  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
  const Eigen::Index a = mean.rows();
  raw.resize(a, mean.cols());
  log_prob.resize(mean.cols());
  for (Eigen::Index b = 0; b < mean.cols(); ++b) {
    Scalar lp = 0;
    for (Eigen::Index d = 0; d < a; ++d) {
      const Scalar z = normal(rng);
      raw(d, b) = mean(d, b) + std::exp(log_std(d)) * z;
      lp += Scalar(-0.5) * z * z - log_std(d) - kHalfLog2Pi<Scalar>;
    }
    log_prob(b) = lp;
  }
}

/// Clips each dimension of a raw action into the environment's bounds.
inline void squash_action(std::span<const float> raw, const ActionBox& box, std::span<float> out) {
  for (std::size_t d = 0; d < kActionDim; ++d) out[d] = std::clamp(raw[d], box.lo[d], box.hi[d]);
}

/// Rollout storage for one policy group of n agents over t steps. Samples
/// are stored time-major: column k * n + a holds agent a at step k.
/// `values` carries an extra step t of bootstrap values.
template <class Scalar>
struct BasicTrajectoryBuffer {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::size_t n{0};
  std::size_t t{0};
  Matrix observations;  // obs_dim x (t * n)
  Matrix actions;       // action_dim x (t * n), unclipped samples
  Vector log_probs;     // t * n
  Vector rewards;       // t * n
  Vector values;        // (t + 1) * n
  Vector advantages;    // t * n
  Vector returns;       // t * n

  BasicTrajectoryBuffer() = default;
  BasicTrajectoryBuffer(std::size_t agents, std::size_t steps, std::size_t obs_dim, std::size_t action_dim)
      : n(agents), t(steps) {
    const auto m = static_cast<Eigen::Index>(agents * steps);
    observations.resize(static_cast<Eigen::Index>(obs_dim), m);
    actions.resize(static_cast<Eigen::Index>(action_dim), m);
    log_probs.resize(m);
    rewards.resize(m);
    values.resize(static_cast<Eigen::Index>(agents * (steps + 1)));
    advantages.resize(m);
    returns.resize(m);
  }

  std::size_t samples() const { return n * t; }
  Eigen::Index index(std::size_t agent, std::size_t step) const { return static_cast<Eigen::Index>(step * n + agent); }
};

using TrajectoryBuffer = BasicTrajectoryBuffer<float>;

/// Generalised advantage estimation for a continuing task: the last step
/// bootstraps from values[t]. Fills advantages and returns = adv + value.
template <class Scalar>
void gae(BasicTrajectoryBuffer<Scalar>& buf, Scalar gamma, Scalar lambda) {
  const Scalar decay = gamma * lambda;
  for (std::size_t a = 0; a < buf.n; ++a) {
    Scalar running = 0;
    for (std::size_t k = buf.t; k-- > 0;) {
      const auto i = buf.index(a, k);
      const Scalar delta = buf.rewards(i) + gamma * buf.values(buf.index(a, k + 1)) - buf.values(i);
      running = delta + decay * running;
      buf.advantages(i) = running;
      buf.returns(i) = running + buf.values(i);
    }
  }
}

template <class Scalar>
struct Minibatch {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix observations;  // obs_dim x B
  Matrix actions;       // action_dim x B (raw samples)
  Vector old_log_probs;
  Vector advantages;
  Vector returns;

  Eigen::Index size() const { return observations.cols(); }
};

/// Rescales advantages to zero mean and unit standard deviation.
template <class Scalar>
void normalize_advantages(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& adv) {
  if (adv.size() == 0) return;
  const Scalar mean = adv.mean();
  const Scalar var = (adv.array() - mean).square().mean();
  adv = ((adv.array() - mean) / (std::sqrt(var) + Scalar(1e-8))).matrix();
}

template <class Scalar>
struct LossResult {
  Scalar loss{0};
  Scalar policy_loss{0};  // -mean(min(rho A, clip(rho) A))
  Scalar value_loss{0};   // mean((V - R)^2)
  Scalar entropy{0};      // mean policy entropy
  Scalar clip_fraction{0};
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> grad;
};

struct LossCoefficients {
  double clip{0.2};
  double value_coef{0.5};
  double entropy_coef{0.0};
};

/// Clipped-surrogate PPO loss and its exact gradient:
///   L = -mean(min(rho A, clip(rho, 1-eps, 1+eps) A))
///       + value_coef * mean((V - R)^2) - entropy_coef * mean(H).
/// The minibatch is processed in fixed chunks of `chunk` samples whose
/// partial sums are combined in chunk order, so the result does not depend
/// on `workers`.
template <class Scalar>
LossResult<Scalar> ppo_loss(const ActorCritic<Scalar>& policy, const Minibatch<Scalar>& mb, LossCoefficients coef,
                            int workers = 1, std::size_t chunk = 128) {
  using Matrix = typename ActorCritic<Scalar>::Matrix;
  using Vector = typename ActorCritic<Scalar>::Vector;
  using RowVector = typename ActorCritic<Scalar>::RowVector;

  const auto batch = static_cast<std::size_t>(mb.size());
  if (batch == 0) throw ContractError("ppo_loss: empty minibatch");
  const Eigen::Index a_dim = policy.action_dim();
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(batch);
  const Scalar eps = static_cast<Scalar>(coef.clip);
  const Scalar value_coef = static_cast<Scalar>(coef.value_coef);
  const Scalar entropy_coef = static_cast<Scalar>(coef.entropy_coef);
  const Vector log_std = policy.log_std();
  const Vector inv_std = (-log_std.array()).exp().matrix();

  struct Partial {
    Vector grad;
    Scalar surrogate{0};
    Scalar value_sq{0};
    Scalar clipped{0};
  };
  const std::size_t chunks = chunk_count(batch, chunk);
  std::vector<Partial> parts(chunks);

  parallel_chunks(batch, chunk, workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
    const auto b0 = static_cast<Eigen::Index>(begin);
    const auto len = static_cast<Eigen::Index>(end - begin);
    Partial& part = parts[c];
    part.grad = Vector::Zero(static_cast<Eigen::Index>(policy.parameter_count()));
    typename ActorCritic<Scalar>::Activations act;
    const auto obs = mb.observations.middleCols(b0, len);
    policy.forward(obs, act);

    Matrix d_mean(a_dim, len);
    RowVector d_value(len);
    Vector d_log_std = Vector::Zero(a_dim);
    for (Eigen::Index k = 0; k < len; ++k) {
      const Eigen::Index s = b0 + k;
      Scalar lp = 0;
      for (Eigen::Index d = 0; d < a_dim; ++d) {
        const Scalar z = (mb.actions(d, s) - act.mean(d, k)) * inv_std(d);
        lp += Scalar(-0.5) * z * z - log_std(d) - kHalfLog2Pi<Scalar>;
      }
      const Scalar ratio = std::exp(lp - mb.old_log_probs(s));
      const Scalar adv = mb.advantages(s);
      const Scalar clipped_ratio = std::clamp(ratio, Scalar(1) - eps, Scalar(1) + eps);
      const Scalar unclipped_obj = ratio * adv;
      const Scalar clipped_obj = clipped_ratio * adv;
      part.surrogate += std::min(unclipped_obj, clipped_obj);
      if (std::abs(ratio - Scalar(1)) > eps) part.clipped += Scalar(1);
      // d(-min)/d(log prob): the unclipped branch carries -A * rho.
      const Scalar g_lp = unclipped_obj <= clipped_obj ? -adv * ratio * inv_b : Scalar(0);
      for (Eigen::Index d = 0; d < a_dim; ++d) {
        const Scalar z = (mb.actions(d, s) - act.mean(d, k)) * inv_std(d);
        d_mean(d, k) = g_lp * z * inv_std(d);
        d_log_std(d) += g_lp * (z * z - Scalar(1));
      }
      const Scalar err = act.value(k) - mb.returns(s);
      part.value_sq += err * err;
      d_value(k) = Scalar(2) * value_coef * err * inv_b;
    }
    policy.backward(obs, act, d_mean, d_value, d_log_std, part.grad);
  });

  LossResult<Scalar> r;
  r.grad = Vector::Zero(static_cast<Eigen::Index>(policy.parameter_count()));
  Scalar surrogate = 0, value_sq = 0, clipped = 0;
  for (const auto& part : parts) {
    r.grad += part.grad;
    surrogate += part.surrogate;
    value_sq += part.value_sq;
    clipped += part.clipped;
  }
  // Entropy of a diagonal Gaussian is state independent.
  Scalar entropy = 0;
  for (Eigen::Index d = 0; d < a_dim; ++d) entropy += Scalar(0.5) + kHalfLog2Pi<Scalar> + log_std(d);
  const std::size_t ls = policy.block("log_std").offset;
  for (Eigen::Index d = 0; d < a_dim; ++d) r.grad(static_cast<Eigen::Index>(ls) + d) -= entropy_coef;

  r.policy_loss = -surrogate * inv_b;
  r.value_loss = value_sq * inv_b;
  r.entropy = entropy;
  r.clip_fraction = clipped * inv_b;
  r.loss = r.policy_loss + value_coef * r.value_loss - entropy_coef * r.entropy;
  if (!std::isfinite(r.loss) || !r.grad.allFinite())
    throw TrainingError("ppo_loss: non-finite loss or gradient (policy " + std::to_string(r.policy_loss) +
                        ", value " + std::to_string(r.value_loss) + ", entropy " + std::to_string(r.entropy) + ")");
  return r;
}

template <class Scalar>
struct AdamState {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> m;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v;
  std::int64_t step{0};

  static AdamState zeros(std::size_t size) {
    AdamState s;
    s.m = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(static_cast<Eigen::Index>(size));
    s.v = s.m;
    return s;
  }
};

struct AdamHyper {
  double lr{3e-4};
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-8};
};

/// One bias-corrected Adam step.
template <class Scalar>
void adam_update(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& params, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& grads,
                 AdamState<Scalar>& state, AdamHyper h) {
  if (state.m.size() != params.size()) state = AdamState<Scalar>::zeros(static_cast<std::size_t>(params.size()));
  ++state.step;
  const auto b1 = static_cast<Scalar>(h.beta1);
  const auto b2 = static_cast<Scalar>(h.beta2);
  state.m = b1 * state.m + (Scalar(1) - b1) * grads;
  state.v = b2 * state.v + (Scalar(1) - b2) * grads.cwiseProduct(grads);
  const auto c1 = static_cast<Scalar>(1.0 - std::pow(h.beta1, static_cast<double>(state.step)));
  const auto c2 = static_cast<Scalar>(1.0 - std::pow(h.beta2, static_cast<double>(state.step)));
  const auto lr = static_cast<Scalar>(h.lr);
  const auto eps = static_cast<Scalar>(h.eps);
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

}  // namespace swarm

#endif  // SWARM_PPO_HPP
