#ifndef SWARM_CHECKPOINT_HPP
#define SWARM_CHECKPOINT_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swarm/env_common.hpp"
#include "swarm/error.hpp"
#include "swarm/trainer.hpp"

namespace swarm {

inline constexpr const char* kCheckpointFormat = "swarm-checkpoint";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

template <class Vec>
nlohmann::json to_array(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

template <class Scalar>
void from_array(const nlohmann::json& a, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& out, std::size_t expect,
                const std::string& what) {
  if (!a.is_array() || a.size() != expect)
    throw ContractError("checkpoint: '" + what + "' should hold " + std::to_string(expect) + " values");
  out.resize(static_cast<Eigen::Index>(expect));
  for (std::size_t i = 0; i < expect; ++i) out(static_cast<Eigen::Index>(i)) = a[i].get<Scalar>();
}

}  // namespace detail

/// Serialises one policy slot together with everything shared that a
/// bit-exact continuation needs (rng stream, step counter, agent state).
inline nlohmann::json checkpoint_json(const TrainingState& state, std::size_t slot_index, const EnvState& env_state,
                                      const nlohmann::json& config) {
  const PolicySlot& slot = state.slots.at(slot_index);
  const Policy& pol = slot.policy;
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["policy"] = slot.name;
  j["config"] = config;
  j["training_step"] = state.step;
  j["obs_dim"] = pol.obs_dim();
  j["action_dim"] = pol.action_dim();
  j["hidden"] = pol.hidden();
  j["parameter_count"] = pol.parameter_count();
  j["action_box"] = {{"lo", {slot.box.lo[0], slot.box.lo[1]}}, {"hi", {slot.box.hi[0], slot.box.hi[1]}}};
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t k = 0; k < pol.blocks().size(); ++k) {
    const auto& b = pol.blocks()[k];
    const auto v = pol.view(pol.parameters(), k);
    nlohmann::json values = nlohmann::json::array();
    // row-major so shapes read naturally
    for (int r = 0; r < b.rows; ++r)
      for (int c = 0; c < b.cols; ++c) values.push_back(v(r, c));
    params.push_back({{"name", b.name}, {"shape", {b.rows, b.cols}}, {"values", std::move(values)}});
  }
  j["parameters"] = std::move(params);
  j["adam"] = {{"step", slot.adam.step}, {"m", detail::to_array(slot.adam.m)}, {"v", detail::to_array(slot.adam.v)}};
  const RewardScaler& rs = slot.reward_scaler;
  j["reward_scaler"] = {{"mean", rs.mean}, {"var", rs.var}, {"count", rs.count}, {"running_return", rs.running_return}};
  std::ostringstream rng;
  rng << state.rng;
  j["rng"] = rng.str();
  j["env_state"] = {{"x", env_state.x}, {"y", env_state.y}, {"heading", env_state.heading}, {"speed", env_state.speed}};
  return j;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(1) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const TrainingState& state, std::size_t slot_index,
                            const EnvState& env_state, const nlohmann::json& config = nlohmann::json::object()) {
  write_json_file(path, checkpoint_json(state, slot_index, env_state, config));
}

/// Restores one slot's policy, optimiser and reward statistics in place.
/// The slot must already have the checkpoint's dimensions.
inline void load_slot(PolicySlot& slot, const nlohmann::json& j) {
  try {
    if (j.at("format") != kCheckpointFormat) throw ContractError("checkpoint: unknown format");
    Policy& pol = slot.policy;
    if (j.at("obs_dim").get<int>() != pol.obs_dim() || j.at("action_dim").get<int>() != pol.action_dim() ||
        j.at("hidden").get<int>() != pol.hidden())
      throw ContractError("checkpoint: policy '" + j.at("policy").get<std::string>() + "' has obs_dim " +
                          std::to_string(j.at("obs_dim").get<int>()) + ", action_dim " +
                          std::to_string(j.at("action_dim").get<int>()) + ", hidden " +
                          std::to_string(j.at("hidden").get<int>()) + " but the environment needs obs_dim " +
                          std::to_string(pol.obs_dim()) + ", action_dim " + std::to_string(pol.action_dim()) +
                          ", hidden " + std::to_string(pol.hidden()));
    const auto& params = j.at("parameters");
    if (params.size() != pol.blocks().size()) throw ContractError("checkpoint: wrong number of parameter blocks");
    for (std::size_t k = 0; k < pol.blocks().size(); ++k) {
      const auto& b = pol.blocks()[k];
      const auto& p = params[k];
      if (p.at("name") != b.name) throw ContractError("checkpoint: expected block '" + b.name + "'");
      const auto shape = p.at("shape").get<std::vector<int>>();
      if (shape.size() != 2 || shape[0] != b.rows || shape[1] != b.cols)
        throw ContractError("checkpoint: block '" + b.name + "' has the wrong shape");
      const auto& values = p.at("values");
      if (values.size() != b.size()) throw ContractError("checkpoint: block '" + b.name + "' has the wrong size");
      auto v = pol.view(pol.parameters(), k);
      std::size_t idx = 0;
      for (int r = 0; r < b.rows; ++r)
        for (int c = 0; c < b.cols; ++c) v(r, c) = values[idx++].get<float>();
    }
    const auto& adam = j.at("adam");
    slot.adam.step = adam.at("step").get<std::int64_t>();
    detail::from_array(adam.at("m"), slot.adam.m, pol.parameter_count(), "adam.m");
    detail::from_array(adam.at("v"), slot.adam.v, pol.parameter_count(), "adam.v");
    const auto& rs = j.at("reward_scaler");
    slot.reward_scaler.mean = rs.at("mean").get<double>();
    slot.reward_scaler.var = rs.at("var").get<double>();
    slot.reward_scaler.count = rs.at("count").get<double>();
    slot.reward_scaler.running_return = rs.at("running_return").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("checkpoint: malformed (") + e.what() + ")");
  }
}

inline EnvState checkpoint_env_state(const nlohmann::json& j) {
  try {
    const auto& s = j.at("env_state");
    EnvState out;
    out.x = s.at("x").get<std::vector<float>>();
    out.y = s.at("y").get<std::vector<float>>();
    out.heading = s.at("heading").get<std::vector<float>>();
    out.speed = s.at("speed").get<std::vector<float>>();
    if (out.y.size() != out.x.size() || out.heading.size() != out.x.size() || out.speed.size() != out.x.size())
      throw ContractError("checkpoint: env_state arrays differ in length");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("checkpoint: malformed env_state (") + e.what() + ")");
  }
}

/// Restores a full training state from one checkpoint per policy group
/// (any order; matched by policy name) and puts the environment back in
/// the saved agent state.
template <MultiAgentEnv Env>
TrainingState load_training_state(Env& env, const PPOConfig& cfg, const std::vector<nlohmann::json>& checkpoints) {
  TrainingState state = make_training_state(env, cfg);
  if (checkpoints.size() != state.slots.size())
    throw ContractError("checkpoint: environment has " + std::to_string(state.slots.size()) + " policies, got " +
                        std::to_string(checkpoints.size()) + " checkpoints");
  for (auto& slot : state.slots) {
    const nlohmann::json* match = nullptr;
    for (const auto& c : checkpoints)
      if (c.value("policy", std::string()) == slot.name) match = &c;
    if (!match) throw ContractError("checkpoint: none for policy '" + slot.name + "'");
    load_slot(slot, *match);
  }
  const nlohmann::json& first = checkpoints.front();
  state.step = first.at("training_step").get<std::int64_t>();
  std::istringstream rng(first.at("rng").get<std::string>());
  rng >> state.rng;
  if (!rng) throw ContractError("checkpoint: unreadable rng state");
  env.restore(checkpoint_env_state(first));
  return state;
}

}  // namespace swarm

#endif  // SWARM_CHECKPOINT_HPP
