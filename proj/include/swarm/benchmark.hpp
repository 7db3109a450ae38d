#ifndef SWARM_BENCHMARK_HPP
#define SWARM_BENCHMARK_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "swarm/config.hpp"
#include "swarm/env_common.hpp"
#include "swarm/error.hpp"
#include "swarm/flock.hpp"
#include "swarm/tag.hpp"
#include "swarm/trainer.hpp"

namespace swarm {

enum class DensityMode { fixed_world, fixed_density };

inline std::string to_string(DensityMode m) { return m == DensityMode::fixed_world ? "fixed-world" : "fixed-density"; }

inline DensityMode parse_density_mode(const std::string& s) {
  if (s == "fixed-world") return DensityMode::fixed_world;
  if (s == "fixed-density") return DensityMode::fixed_density;
  throw ConfigError("mode", "expected fixed-world or fixed-density, got '" + s + "'");
}

struct BenchmarkRow {
  std::string env;
  std::size_t n{0};
  std::size_t steps{0};
  double env_steps_per_sec{0};
  double train_step_ms{0};  // NaN when training was not timed
  DensityMode mode{DensityMode::fixed_world};
};

/// The run config for n agents. Fixed-world keeps the configured world;
/// fixed-density scales its side by sqrt(n / 1000) so the agent density
/// of 1000 agents in the configured world is kept. Tag uses n / 10
/// chasers out of n.
inline RunConfig benchmark_config(RunConfig cfg, std::size_t n, DensityMode mode) {
  const float scale = mode == DensityMode::fixed_density ? std::sqrt(static_cast<float>(n) / 1000.0f) : 1.0f;
  if (cfg.environment == Environment::flock) {
    cfg.flock.n = n;
    cfg.flock.world.width *= scale;
    cfg.flock.world.height *= scale;
  } else if (cfg.environment == Environment::tag) {
    const std::size_t chasers = std::max<std::size_t>(1, n / 10);
    if (n <= chasers) throw ConfigError("counts", "tag needs at least 2 agents");
    cfg.tag.n_chasers = chasers;
    cfg.tag.n_runners = n - chasers;
    cfg.tag.world.width *= scale;
    cfg.tag.world.height *= scale;
  } else {
    throw ConfigError("environment", "benchmarks cover flock and tag only");
  }
  return cfg;
}

namespace detail {

template <class Env>
BenchmarkRow run_benchmark(Env& env, const RunConfig& cfg, std::size_t steps, std::size_t train_steps) {
  using clock = std::chrono::steady_clock;
  BenchmarkRow row;
  row.n = env.num_agents();
  row.steps = steps;
  env.reset(cfg.ppo.seed);
  // actions drawn up front so only stepping is timed
  std::mt19937_64 rng(cfg.ppo.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<float> actions(steps * env.num_agents() * kActionDim);
  for (std::size_t s = 0; s < steps; ++s)
    for (std::size_t i = 0; i < env.num_agents(); ++i) {
      const ActionBox box = env.action_box(env.group_of(i));
      for (std::size_t d = 0; d < kActionDim; ++d)
        actions[(s * env.num_agents() + i) * kActionDim + d] =
            std::uniform_real_distribution<float>(box.lo[d], box.hi[d])(rng);
    }
  const std::size_t stride = env.num_agents() * kActionDim;
  const auto t0 = clock::now();
  for (std::size_t s = 0; s < steps; ++s) env.step(std::span<const float>(actions).subspan(s * stride, stride));
  const double secs = std::chrono::duration<double>(clock::now() - t0).count();
  row.env_steps_per_sec = secs > 0 ? static_cast<double>(steps) / secs : INFINITY;

  row.train_step_ms = NAN;
  if (train_steps > 0) {
    TrainingState state = make_training_state(env, cfg.ppo);
    double total = 0;
    for (std::size_t k = 0; k < train_steps; ++k) {
      const MetricsRow m = train_step(env, state, cfg.ppo, cfg.workers);
      total += m.wall_ms_env + m.wall_ms_update;
    }
    row.train_step_ms = total / static_cast<double>(train_steps);
  }
  return row;
}

}  // namespace detail

inline BenchmarkRow benchmark_point(const RunConfig& base, std::size_t n, DensityMode mode, std::size_t steps,
                                    std::size_t train_steps) {
  const RunConfig cfg = benchmark_config(base, n, mode);
  validate(cfg);
  BenchmarkRow row;
  if (cfg.environment == Environment::flock) {
    FlockEnv env(cfg.flock, cfg.workers);
    row = detail::run_benchmark(env, cfg, steps, train_steps);
  } else {
    TagEnv env(cfg.tag, cfg.workers);
    row = detail::run_benchmark(env, cfg, steps, train_steps);
  }
  row.env = to_string(cfg.environment);
  row.mode = mode;
  return row;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("loglog_slope: need at least two matching points");
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace swarm

#endif  // SWARM_BENCHMARK_HPP
