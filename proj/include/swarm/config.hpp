#ifndef SWARM_CONFIG_HPP
#define SWARM_CONFIG_HPP

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swarm/error.hpp"
#include "swarm/flock.hpp"
#include "swarm/ppo.hpp"
#include "swarm/tag.hpp"

namespace swarm {

enum class Environment { flock, tag, opinion };

inline std::string to_string(Environment e) {
  switch (e) {
    case Environment::flock: return "flock";
    case Environment::tag: return "tag";
    case Environment::opinion: return "opinion";
  }
  return "?";
}

inline Environment parse_environment(const std::string& s) {
  if (s == "flock") return Environment::flock;
  if (s == "tag") return Environment::tag;
  if (s == "opinion") return Environment::opinion;
  throw ConfigError("environment", "expected flock, tag or opinion, got '" + s + "'");
}

struct OpinionParams {
  std::size_t n{100};
  double threshold{0.5};
  double strength{0.5};
  double weight{1.0};
  std::string graph{"complete"};  // or "random"
  double edge_prob{0.1};
};

/// Everything a run needs. Serialises to a flat JSON object; keys that do
/// not apply to the chosen environment are rejected.
struct RunConfig {
  Environment environment{Environment::flock};
  FlockParams flock{};
  TagParams tag{};
  OpinionParams opinion{};
  PPOConfig ppo{};
  int workers{1};
  std::string output_dir{};
};

namespace detail {

// Shortest decimal of the float, so 0.1f echoes as 0.1.
inline nlohmann::json float_json(float v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::stod(std::string(buf, r.ptr));
}

inline double number(const std::string& key, const nlohmann::json& v) {
  if (!v.is_number()) throw ConfigError(key, "expected a number, got " + v.dump());
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(key, "must be finite");
  return d;
}

inline float number_f(const std::string& key, const nlohmann::json& v) {
  return static_cast<float>(number(key, v));
}

inline std::int64_t integer(const std::string& key, const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
  }
  throw ConfigError(key, "expected an integer, got " + v.dump());
}

inline std::size_t count(const std::string& key, const nlohmann::json& v) {
  const auto i = integer(key, v);
  if (i < 0) throw ConfigError(key, "must be >= 0");
  return static_cast<std::size_t>(i);
}

inline int small_int(const std::string& key, const nlohmann::json& v) {
  const auto i = integer(key, v);
  if (i < -2147483647 || i > 2147483647) throw ConfigError(key, "out of range");
  return static_cast<int>(i);
}

inline bool boolean(const std::string& key, const nlohmann::json& v) {
  if (!v.is_boolean()) throw ConfigError(key, "expected true or false, got " + v.dump());
  return v.get<bool>();
}

inline std::string text(const std::string& key, const nlohmann::json& v) {
  if (!v.is_string()) throw ConfigError(key, "expected a string, got " + v.dump());
  return v.get<std::string>();
}

constexpr float kDeg = std::numbers::pi_v<float> / 180.0f;

using Setter = std::function<void(RunConfig&, const std::string&, const nlohmann::json&)>;

struct KeySpec {
  std::set<Environment> envs;
  Setter set;
};

inline const std::map<std::string, KeySpec>& key_table() {
  using E = Environment;
  static const std::map<std::string, KeySpec> table = [] {
    std::map<std::string, KeySpec> t;
    const std::set<E> spatial{E::flock, E::tag};
    const std::set<E> all{E::flock, E::tag, E::opinion};
    auto both = [](auto fn) {
      return [fn](RunConfig& c, const std::string& k, const nlohmann::json& v) {
        if (c.environment == E::flock) fn(c.flock, k, v);
        if (c.environment == E::tag) fn(c.tag, k, v);
      };
    };
    t["seed"] = {all, [](RunConfig& c, const std::string& k, const nlohmann::json& v) {
                   const auto s = integer(k, v);
                   if (s < 0) throw ConfigError(k, "must be >= 0");
                   c.ppo.seed = static_cast<std::uint64_t>(s);
                 }};
    t["workers"] = {all, [](RunConfig& c, const std::string& k, const nlohmann::json& v) { c.workers = small_int(k, v); }};
    t["output_dir"] = {all, [](RunConfig& c, const std::string& k, const nlohmann::json& v) { c.output_dir = text(k, v); }};

    t["width"] = {spatial, both([](auto& p, const std::string& k, const nlohmann::json& v) { p.world.width = number_f(k, v); })};
    t["height"] = {spatial, both([](auto& p, const std::string& k, const nlohmann::json& v) { p.world.height = number_f(k, v); })};
    t["d_r"] = {spatial, both([](auto& p, const std::string& k, const nlohmann::json& v) { p.d_r = number_f(k, v); })};
    t["v"] = {spatial, both([](auto& p, const std::string& k, const nlohmann::json& v) { p.view.v = small_int(k, v); })};
    t["fov_deg"] = {spatial, both([](auto& p, const std::string& k, const nlohmann::json& v) { p.view.fov = number_f(k, v) * kDeg; })};
    t["d_v"] = {spatial, both([](auto& p, const std::string& k, const nlohmann::json& v) { p.view.d_v = number_f(k, v); })};
    t["theta_max"] = {spatial, both([](auto& p, const std::string& k, const nlohmann::json& v) { p.theta_max = number_f(k, v); })};

    t["n"] = {{E::flock, E::opinion}, [](RunConfig& c, const std::string& k, const nlohmann::json& v) {
                if (c.environment == E::flock) c.flock.n = count(k, v);
                else c.opinion.n = count(k, v);
              }};
    auto fl = [](auto member) {
      return [member](RunConfig& c, const std::string& k, const nlohmann::json& v) { c.flock.*member = number_f(k, v); };
    };
    t["s_min"] = {{E::flock}, fl(&FlockParams::s_min)};
    t["s_max"] = {{E::flock}, fl(&FlockParams::s_max)};
    t["a_max"] = {{E::flock}, fl(&FlockParams::a_max)};
    t["c_collide"] = {spatial, [](RunConfig& c, const std::string& k, const nlohmann::json& v) {
                        (c.environment == E::flock ? c.flock.reward_shape : c.tag.proximity_shape).c_collide = number_f(k, v);
                      }};
    t["c_near"] = {spatial, [](RunConfig& c, const std::string& k, const nlohmann::json& v) {
                     (c.environment == E::flock ? c.flock.reward_shape : c.tag.proximity_shape).c_near = number_f(k, v);
                   }};

    t["n_runners"] = {{E::tag}, [](RunConfig& c, const std::string& k, const nlohmann::json& v) { c.tag.n_runners = count(k, v); }};
    t["n_chasers"] = {{E::tag}, [](RunConfig& c, const std::string& k, const nlohmann::json& v) { c.tag.n_chasers = count(k, v); }};
    auto tg = [](auto member) {
      return [member](RunConfig& c, const std::string& k, const nlohmann::json& v) { c.tag.*member = number_f(k, v); };
    };
    t["s_max_runner"] = {{E::tag}, tg(&TagParams::s_max_runner)};
    t["s_max_chaser"] = {{E::tag}, tg(&TagParams::s_max_chaser)};
    t["r_touch"] = {{E::tag}, tg(&TagParams::r_touch)};
    t["proximity_weight"] = {{E::tag}, tg(&TagParams::proximity_weight)};

    auto op = [](auto member) {
      return [member](RunConfig& c, const std::string& k, const nlohmann::json& v) { c.opinion.*member = number(k, v); };
    };
    t["threshold"] = {{E::opinion}, op(&OpinionParams::threshold)};
    t["strength"] = {{E::opinion}, op(&OpinionParams::strength)};
    t["weight"] = {{E::opinion}, op(&OpinionParams::weight)};
    t["edge_prob"] = {{E::opinion}, op(&OpinionParams::edge_prob)};
    t["graph"] = {{E::opinion}, [](RunConfig& c, const std::string& k, const nlohmann::json& v) { c.opinion.graph = text(k, v); }};

    auto pi = [](auto member) {
      return [member](RunConfig& c, const std::string& k, const nlohmann::json& v) { c.ppo.*member = small_int(k, v); };
    };
    auto pd = [](auto member) {
      return [member](RunConfig& c, const std::string& k, const nlohmann::json& v) { c.ppo.*member = number(k, v); };
    };
    t["T"] = {all, pi(&PPOConfig::T)};
    t["t"] = {spatial, pi(&PPOConfig::t)};
    t["p"] = {spatial, pi(&PPOConfig::p)};
    t["batch_size"] = {spatial, pi(&PPOConfig::batch_size)};
    t["b_max"] = {spatial, pi(&PPOConfig::b_max)};
    t["hidden"] = {spatial, pi(&PPOConfig::hidden)};
    t["gamma"] = {spatial, pd(&PPOConfig::gamma)};
    t["lambda"] = {spatial, pd(&PPOConfig::lambda)};
    t["clip"] = {spatial, pd(&PPOConfig::clip)};
    t["lr"] = {spatial, pd(&PPOConfig::lr)};
    t["adam_beta1"] = {spatial, pd(&PPOConfig::adam_beta1)};
    t["adam_beta2"] = {spatial, pd(&PPOConfig::adam_beta2)};
    t["adam_eps"] = {spatial, pd(&PPOConfig::adam_eps)};
    t["value_coef"] = {spatial, pd(&PPOConfig::value_coef)};
    t["entropy_coef"] = {spatial, pd(&PPOConfig::entropy_coef)};
    t["normalize_rewards"] = {spatial, [](RunConfig& c, const std::string& k, const nlohmann::json& v) {
                                c.ppo.normalize_rewards = boolean(k, v);
                              }};
    return t;
  }();
  return table;
}

// Library error fields -> config keys.
inline std::string config_key(const std::string& field) {
  static const std::map<std::string, std::string> m{
      {"view.v", "v"},          {"view.fov", "fov_deg"},       {"view.d_v", "d_v"},
      {"view.d_r", "d_r"},      {"world.width", "width"},      {"world.height", "height"},
      {"reward.c_collide", "c_collide"}, {"reward.c_near", "c_near"}, {"reward.d_collide", "d_r"},
  };
  const auto it = m.find(field);
  return it == m.end() ? field : it->second;
}

}  // namespace detail

/// Sets one key. Values are JSON scalars.
inline void apply_key(RunConfig& cfg, const std::string& key, const nlohmann::json& value) {
  if (key == "environment") {
    cfg.environment = parse_environment(detail::text(key, value));
    return;
  }
  const auto& table = detail::key_table();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key, "unknown configuration key");
  if (!it->second.envs.contains(cfg.environment))
    throw ConfigError(key, "not used by the " + to_string(cfg.environment) + " environment");
  it->second.set(cfg, key, value);
}

/// Applies a flat object on top of cfg; "environment" is applied first.
inline void apply_object(RunConfig& cfg, const nlohmann::json& obj) {
  if (!obj.is_object()) throw ConfigError("config", "expected a JSON object at the top level");
  if (obj.contains("environment")) apply_key(cfg, "environment", obj.at("environment"));
  for (const auto& [key, value] : obj.items())
    if (key != "environment") apply_key(cfg, key, value);
}

/// "key=value". The value is read as JSON when it parses, else as a string.
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  apply_key(cfg, key, value);
}

/// Flat echo of every key that applies to the environment. Feeding it to
/// apply_object reproduces cfg exactly.
inline nlohmann::json to_json(const RunConfig& c) {
  using detail::float_json;
  nlohmann::json j;
  j["environment"] = to_string(c.environment);
  j["seed"] = c.ppo.seed;
  j["workers"] = c.workers;
  if (!c.output_dir.empty()) j["output_dir"] = c.output_dir;
  auto spatial = [&](const auto& p) {
    j["width"] = float_json(p.world.width);
    j["height"] = float_json(p.world.height);
    j["d_r"] = float_json(p.d_r);
    j["v"] = p.view.v;
    j["fov_deg"] = float_json(p.view.fov / detail::kDeg);
    j["d_v"] = float_json(p.view.d_v);
    j["theta_max"] = float_json(p.theta_max);
  };
  if (c.environment == Environment::flock) {
    spatial(c.flock);
    j["n"] = c.flock.n;
    j["s_min"] = float_json(c.flock.s_min);
    j["s_max"] = float_json(c.flock.s_max);
    j["a_max"] = float_json(c.flock.a_max);
    j["c_collide"] = float_json(c.flock.reward_shape.c_collide);
    j["c_near"] = float_json(c.flock.reward_shape.c_near);
  } else if (c.environment == Environment::tag) {
    spatial(c.tag);
    j["n_runners"] = c.tag.n_runners;
    j["n_chasers"] = c.tag.n_chasers;
    j["s_max_runner"] = float_json(c.tag.s_max_runner);
    j["s_max_chaser"] = float_json(c.tag.s_max_chaser);
    j["r_touch"] = float_json(c.tag.r_touch);
    j["proximity_weight"] = float_json(c.tag.proximity_weight);
    j["c_collide"] = float_json(c.tag.proximity_shape.c_collide);
    j["c_near"] = float_json(c.tag.proximity_shape.c_near);
  } else {
    j["n"] = c.opinion.n;
    j["threshold"] = c.opinion.threshold;
    j["strength"] = c.opinion.strength;
    j["weight"] = c.opinion.weight;
    j["graph"] = c.opinion.graph;
    j["edge_prob"] = c.opinion.edge_prob;
    j["T"] = c.ppo.T;
    return j;
  }
  const PPOConfig& p = c.ppo;
  j["T"] = p.T;
  j["t"] = p.t;
  j["p"] = p.p;
  j["batch_size"] = p.batch_size;
  j["b_max"] = p.b_max;
  j["hidden"] = p.hidden;
  j["gamma"] = p.gamma;
  j["lambda"] = p.lambda;
  j["clip"] = p.clip;
  j["lr"] = p.lr;
  j["adam_beta1"] = p.adam_beta1;
  j["adam_beta2"] = p.adam_beta2;
  j["adam_eps"] = p.adam_eps;
  j["value_coef"] = p.value_coef;
  j["entropy_coef"] = p.entropy_coef;
  j["normalize_rewards"] = p.normalize_rewards;
  return j;
}

/// Rollout bookkeeping for one policy group.
struct GroupDerived {
  std::string name;
  std::size_t agents{0};
  std::size_t m{0};                 // samples per training step
  std::size_t b{0};                 // minibatches per epoch
  std::size_t minibatch_updates{0};  // T * p * b
};

struct Derived {
  std::size_t n{0};
  std::size_t obs_dim{0};
  std::vector<GroupDerived> groups;
};

inline Derived derive(const RunConfig& c) {
  Derived d;
  auto group = [&](std::string name, std::size_t agents) {
    GroupDerived g{std::move(name), agents, agents * static_cast<std::size_t>(c.ppo.t), 0, 0};
    g.b = minibatches_per_epoch(g.m, c.ppo);
    g.minibatch_updates = static_cast<std::size_t>(c.ppo.T) * static_cast<std::size_t>(c.ppo.p) * g.b;
    d.groups.push_back(std::move(g));
  };
  switch (c.environment) {
    case Environment::flock:
      d.n = c.flock.n;
      d.obs_dim = c.flock.obs_dim();
      group("flock", c.flock.n);
      break;
    case Environment::tag:
      d.n = c.tag.n();
      d.obs_dim = c.tag.obs_dim();
      group("runner", c.tag.n_runners);
      group("chaser", c.tag.n_chasers);
      break;
    case Environment::opinion:
      d.n = c.opinion.n;
      break;
  }
  return d;
}

/// Checks every invariant a run depends on; throws ConfigError naming the
/// offending config key. Rollout sizing is skipped when not training.
inline void validate(const RunConfig& c, bool training = true) {
  try {
    if (c.workers < 1) throw ConfigError("workers", "must be >= 1");
    if (c.ppo.T < 1) throw ConfigError("T", "must be >= 1");
    switch (c.environment) {
      case Environment::flock: {
        FlockParams p = c.flock;
        p.sync().validate();
        c.ppo.validate();
        break;
      }
      case Environment::tag: {
        TagParams p = c.tag;
        p.sync().validate();
        c.ppo.validate();
        break;
      }
      case Environment::opinion: {
        const OpinionParams& o = c.opinion;
        if (o.n == 0) throw ConfigError("n", "at least one agent is required");
        if (!(o.threshold >= 0.0)) throw ConfigError("threshold", "must be >= 0");
        if (!(o.strength >= 0.0)) throw ConfigError("strength", "must be >= 0");
        if (!(o.weight >= 0.0)) throw ConfigError("weight", "must be >= 0");
        if (o.strength * o.weight > 1.0) throw ConfigError("strength", "strength * weight must not exceed 1");
        if (o.graph != "complete" && o.graph != "random")
          throw ConfigError("graph", "expected complete or random, got '" + o.graph + "'");
        if (!(o.edge_prob >= 0.0 && o.edge_prob <= 1.0)) throw ConfigError("edge_prob", "must lie in [0, 1]");
        return;
      }
    }
  } catch (const ConfigError& e) {
    const std::string key = detail::config_key(e.field());
    if (key == e.field()) throw;
    std::string msg = e.what();
    const std::string prefix = e.field() + ": ";
    if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
    throw ConfigError(key, msg);
  }
  if (!training) return;
  for (const auto& g : derive(c).groups)
    if (g.m < static_cast<std::size_t>(c.ppo.batch_size))
      throw ConfigError("batch_size", "the " + g.name + " policy collects m = " + std::to_string(g.m) +
                                          " samples per training step, fewer than batch_size = " +
                                          std::to_string(c.ppo.batch_size));
}

inline RunConfig parse_config(const nlohmann::json& obj) {
  RunConfig c;
  apply_object(c, obj);
  return c;
}

}  // namespace swarm

#endif  // SWARM_CONFIG_HPP
