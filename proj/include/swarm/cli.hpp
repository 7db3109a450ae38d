#ifndef SWARM_CLI_HPP
#define SWARM_CLI_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "swarm/benchmark.hpp"
#include "swarm/checkpoint.hpp"
#include "swarm/config.hpp"
#include "swarm/csv.hpp"
#include "swarm/env_common.hpp"
#include "swarm/error.hpp"
#include "swarm/flock.hpp"
#include "swarm/opinion.hpp"
#include "swarm/tag.hpp"
#include "swarm/trainer.hpp"

#ifndef SWARM_VERSION
#define SWARM_VERSION "0.0.0"
#endif

namespace swarm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr const char* kOutputEnv = "SWARM_OUTPUT_DIR";
inline constexpr const char* kManifestFormat = "swarm-manifest";

inline const std::vector<std::string> kMetricsHeader{"training_step", "mean_reward", "policy_loss",
                                                     "value_loss",    "entropy",     "clip_fraction"};
inline const std::vector<std::string> kTimingHeader{"training_step", "wall_ms_env", "wall_ms_update"};
inline const std::vector<std::string> kBenchmarkHeader{"env",        "n", "steps", "env_steps_per_sec",
                                                       "train_step_ms", "density_mode"};

/// Options shared by every subcommand that reads a run config.
struct CommonOptions {
  std::string config;
  std::optional<std::int64_t> seed;
  std::optional<int> workers;
  std::string output;
  std::vector<std::string> sets;
};

/// A config file is either a flat config or a manifest whose "config"
/// key holds one.
inline nlohmann::json config_object(const nlohmann::json& j) {
  if (j.is_object() && j.contains("config") && j.value("format", std::string()) != "")
    return j.at("config");
  return j;
}

inline RunConfig resolve_config(const CommonOptions& o, const nlohmann::json* base = nullptr, bool training = true) {
  RunConfig cfg;
  if (base) apply_object(cfg, *base);
  if (!o.config.empty()) apply_object(cfg, config_object(read_json_file(o.config)));
  for (const auto& s : o.sets) apply_override(cfg, s);
  if (o.seed) apply_key(cfg, "seed", *o.seed);
  if (o.workers) apply_key(cfg, "workers", *o.workers);
  if (!o.output.empty()) cfg.output_dir = o.output;
  validate(cfg, training);
  return cfg;
}

inline std::filesystem::path output_dir(const RunConfig& cfg, const std::string& what) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  const char* env = std::getenv(kOutputEnv);
  const std::filesystem::path root = env && *env ? env : "runs";
  return root / (what + "-" + to_string(cfg.environment) + "-seed" + std::to_string(cfg.ppo.seed));
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open " + p.string() + " for writing");
  return f;
}

inline nlohmann::json build_info() {
  return {{"version", SWARM_VERSION},
          {"compiler", __VERSION__},
          {"cplusplus", __cplusplus},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command, const RunConfig& cfg,
                           const std::vector<std::string>& files) {
  nlohmann::json m;
  m["format"] = kManifestFormat;
  m["command"] = command;
  m["seed"] = cfg.ppo.seed;
  m["config"] = to_json(cfg);
  m["build"] = build_info();
  m["files"] = files;
  write_json_file(dir / "manifest.json", m);
}

namespace detail {

inline void metrics_row(csv::Writer& w, std::int64_t step, double reward, double pl, double vl, double ent,
                        double cf) {
  w.field(step).field(reward).field(pl).field(vl).field(ent).field(cf).end_row();
}

template <class Env>
std::vector<std::string> train_rl(Env& env, const RunConfig& cfg, const std::filesystem::path& dir,
                                  std::ostream& out) {
  env.reset(cfg.ppo.seed);
  TrainingState state = make_training_state(env, cfg.ppo);
  std::vector<std::string> files{"metrics.csv", "timing.csv"};
  auto metrics_f = open_out(dir / "metrics.csv");
  auto timing_f = open_out(dir / "timing.csv");
  csv::Writer metrics(metrics_f), timing(timing_f);
  metrics.header(kMetricsHeader);
  timing.header(kTimingHeader);
  std::vector<std::ofstream> group_f;
  std::vector<csv::Writer> group_w;
  if (state.slots.size() > 1) {
    group_f.reserve(state.slots.size());
    group_w.reserve(state.slots.size());
    for (const auto& slot : state.slots) {
      const std::string name = "metrics_" + slot.name + ".csv";
      files.push_back(name);
      group_f.push_back(open_out(dir / name));
      group_w.emplace_back(group_f.back());
      group_w.back().header(kMetricsHeader);
    }
  }
  train(env, state, cfg.ppo, cfg.workers, [&](const MetricsRow& r) {
    metrics_row(metrics, r.training_step, r.mean_reward, r.policy_loss, r.value_loss, r.entropy, r.clip_fraction);
    timing.field(r.training_step).field(r.wall_ms_env).field(r.wall_ms_update).end_row();
    for (std::size_t g = 0; g < group_w.size(); ++g) {
      const GroupMetrics& m = r.groups[g];
      metrics_row(group_w[g], r.training_step, m.mean_reward, m.policy_loss, m.value_loss, m.entropy,
                  m.clip_fraction);
    }
    metrics_f.flush();
    out << "step " << r.training_step << "/" << cfg.ppo.T << " mean_reward " << csv::format(r.mean_reward)
        << " env_ms " << csv::format(std::round(r.wall_ms_env)) << " update_ms "
        << csv::format(std::round(r.wall_ms_update)) << '\n';
  });
  const EnvState es = capture_state(env.store());
  const nlohmann::json echo = to_json(cfg);
  for (std::size_t g = 0; g < state.slots.size(); ++g) {
    const std::string name =
        state.slots.size() == 1 ? "checkpoint.json" : "checkpoint_" + state.slots[g].name + ".json";
    save_checkpoint(dir / name, state, g, es, echo);
    files.push_back(name);
  }
  return files;
}

inline OpinionModel make_opinion_model(const RunConfig& cfg) {
  const OpinionParams& o = cfg.opinion;
  std::mt19937_64 rng(cfg.ppo.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> init(o.n);
  for (auto& x : init) x = u(rng);
  auto edges = o.graph == "complete" ? complete_graph(o.n, o.weight) : random_graph(o.n, o.edge_prob, o.weight, cfg.ppo.seed + 1);
  return OpinionModel(std::move(init), std::move(edges), o.threshold, o.strength);
}

inline std::vector<std::string> train_opinion(const RunConfig& cfg, const std::filesystem::path& dir,
                                              std::ostream& out) {
  OpinionModel model = make_opinion_model(cfg);
  auto f = open_out(dir / "opinion.csv");
  auto s = open_out(dir / "opinion_summary.csv");
  csv::Writer w(f), ws(s);
  w.header({"step", "agent", "opinion"});
  ws.header({"step", "spread", "mean_opinion"});
  auto record = [&](int step) {
    const auto o = model.opinions();
    double mean = 0;
    for (std::size_t i = 0; i < o.size(); ++i) {
      w.field(step).field(i).field(o[i]).end_row();
      mean += o[i];
    }
    ws.field(step).field(model.spread()).field(mean / static_cast<double>(o.size())).end_row();
  };
  record(0);
  for (int k = 1; k <= cfg.ppo.T; ++k) {
    model.step(cfg.workers);
    record(k);
  }
  out << "opinion spread after " << cfg.ppo.T << " steps: " << csv::format(model.spread()) << '\n';
  return {"opinion.csv", "opinion_summary.csv"};
}

}  // namespace detail

inline int cmd_train(const CommonOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  const auto dir = output_dir(cfg, "train");
  ensure_dir(dir);
  std::vector<std::string> files;
  switch (cfg.environment) {
    case Environment::flock: {
      FlockEnv env(cfg.flock, cfg.workers);
      files = detail::train_rl(env, cfg, dir, out);
      break;
    }
    case Environment::tag: {
      TagEnv env(cfg.tag, cfg.workers);
      files = detail::train_rl(env, cfg, dir, out);
      break;
    }
    case Environment::opinion:
      files = detail::train_opinion(cfg, dir, out);
      break;
  }
  write_manifest(dir, "train", cfg, files);
  out << "wrote " << dir.string() << '\n';
  return kExitOk;
}

inline std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> counts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || p != item.data() + item.size() || v == 0)
      throw ConfigError("counts", "expected positive integers, got '" + item + "'");
    counts.push_back(v);
  }
  if (counts.empty()) throw ConfigError("counts", "at least one agent count is required");
  for (std::size_t k = 1; k < counts.size(); ++k)
    if (counts[k] <= counts[k - 1]) throw ConfigError("counts", "must be strictly ascending");
  return counts;
}

struct BenchmarkOptions {
  std::string env;
  std::string counts{"1000,2000,4000,8000"};
  std::size_t steps{20};
  std::size_t train_steps{1};
  std::string mode{"fixed-world"};
};

inline int cmd_benchmark(const CommonOptions& o, const BenchmarkOptions& b, std::ostream& out) {
  CommonOptions co = o;
  if (!b.env.empty()) co.sets.insert(co.sets.begin(), "environment=" + b.env);
  const RunConfig cfg = resolve_config(co);
  if (cfg.environment == Environment::opinion) throw ConfigError("env", "benchmarks cover flock and tag only");
  const auto counts = parse_counts(b.counts);
  if (b.steps == 0) throw ConfigError("steps", "must be >= 1");
  std::vector<DensityMode> modes;
  if (b.mode == "both")
    modes = {DensityMode::fixed_world, DensityMode::fixed_density};
  else
    modes = {parse_density_mode(b.mode)};
  for (const auto mode : modes)
    for (const auto n : counts) validate(benchmark_config(cfg, n, mode));

  std::vector<BenchmarkRow> rows;
  for (const auto mode : modes) {
    std::vector<double> xs, ys;
    for (const auto n : counts) {
      rows.push_back(benchmark_point(cfg, n, mode, b.steps, b.train_steps));
      const auto& r = rows.back();
      out << r.env << " n=" << r.n << " " << to_string(mode) << " env_steps_per_sec "
          << csv::format(r.env_steps_per_sec) << " train_step_ms " << csv::format(r.train_step_ms) << '\n';
      xs.push_back(static_cast<double>(r.n));
      ys.push_back(1.0 / r.env_steps_per_sec);
    }
    if (xs.size() >= 2) out << "loglog_slope " << to_string(mode) << " " << csv::format(loglog_slope(xs, ys)) << '\n';
  }
  const auto dir = output_dir(cfg, "benchmark");
  ensure_dir(dir);
  auto f = open_out(dir / "benchmark.csv");
  csv::Writer w(f);
  w.header(kBenchmarkHeader);
  for (const auto& r : rows)
    w.field(r.env).field(r.n).field(r.steps).field(r.env_steps_per_sec).field(r.train_step_ms).field(to_string(r.mode)).end_row();
  f.close();
  write_manifest(dir, "benchmark", cfg, {"benchmark.csv"});
  out << "wrote " << (dir / "benchmark.csv").string() << '\n';
  return kExitOk;
}

struct SnapshotOptions {
  std::vector<std::string> checkpoints;
  std::size_t steps{100};
  std::size_t agent{0};
  bool render{false};
};

namespace detail {

inline void render_svg(const std::filesystem::path& p, const AgentStore& store, const WorldSpec& world) {
  auto f = open_out(p);
  const double scale = 800.0 / std::max(world.width, world.height);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << world.width * scale << "\" height=\""
    << world.height * scale << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < store.size(); ++i) {
    const char* colour = store.types()[i] == 0 ? "#1f4e9c" : "#c0392b";
    f << "<circle cx=\"" << store.x()[i] * scale << "\" cy=\"" << (world.height - store.y()[i]) * scale
      << "\" r=\"2\" fill=\"" << colour << "\"/>\n";
  }
  f << "</svg>\n";
}

// Plain PGM: one row per step, one column per sector value.
inline void render_pgm(const std::filesystem::path& p, const std::vector<std::vector<float>>& rows) {
  auto f = open_out(p);
  const std::size_t w = rows.empty() ? 0 : rows.front().size();
  f << "P2\n" << w << ' ' << rows.size() << "\n255\n";
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.size(); ++k) f << (k ? " " : "") << static_cast<int>(std::lround(r[k] * 255.0f));
    f << '\n';
  }
}

template <class Env>
std::vector<std::string> snapshot(Env& env, const RunConfig& cfg, const std::vector<nlohmann::json>& ckpts,
                                  const SnapshotOptions& s, const std::filesystem::path& dir, const WorldSpec& world) {
  if (s.agent >= env.num_agents())
    throw ConfigError("agent", "index " + std::to_string(s.agent) + " out of range for " +
                                   std::to_string(env.num_agents()) + " agents");
  env.reset(cfg.ppo.seed);
  TrainingState state = make_training_state(env, cfg.ppo);
  if (ckpts.size() != state.slots.size())
    throw ContractError("snapshot: the " + to_string(cfg.environment) + " environment needs " +
                        std::to_string(state.slots.size()) + " checkpoint(s), got " + std::to_string(ckpts.size()));
  for (auto& slot : state.slots) {
    const nlohmann::json* match = ckpts.size() == 1 ? &ckpts.front() : nullptr;
    for (const auto& c : ckpts)
      if (c.value("policy", std::string()) == slot.name) match = &c;
    if (!match) throw ContractError("snapshot: no checkpoint for policy '" + slot.name + "'");
    load_slot(slot, *match);
  }

  auto pos_f = open_out(dir / "positions.csv");
  auto view_f = open_out(dir / "view.csv");
  pos_f << kSnapshotHeader << '\n';
  csv::Writer vw(view_f);
  const auto& vcfg = env.params().view;
  std::vector<std::string> header{"step"};
  for (int c = 0; c < vcfg.channels; ++c)
    for (int k = 0; k < vcfg.v; ++k)
      header.push_back(vcfg.channels == 1 ? "sector_" + std::to_string(k)
                                          : "c" + std::to_string(c) + "_sector_" + std::to_string(k));
  vw.header(header);
  std::vector<std::vector<float>> view_rows;
  for (std::size_t k = 1; k <= s.steps; ++k) {
    const auto actions = policy_actions(env, state, ActionMode::mean, cfg.workers);
    const EnvOutput& o = env.step(actions);
    write_snapshot_rows(pos_f, static_cast<std::int64_t>(k), env.store(), o.rewards);
    const auto row = env.views().row(s.agent);
    vw.field(k);
    for (float v : row) vw.field(v);
    vw.end_row();
    if (s.render) view_rows.emplace_back(row.begin(), row.end());
  }
  std::vector<std::string> files{"positions.csv", "view.csv"};
  if (s.render) {
    render_svg(dir / "positions.svg", env.store(), world);
    render_pgm(dir / "view.pgm", view_rows);
    files.push_back("positions.svg");
    files.push_back("view.pgm");
  }
  return files;
}

}  // namespace detail

inline int cmd_snapshot(const CommonOptions& o, const SnapshotOptions& s, std::ostream& out) {
  if (s.checkpoints.empty()) throw ConfigError("checkpoint", "at least one --checkpoint is required");
  std::vector<nlohmann::json> ckpts;
  for (const auto& p : s.checkpoints) ckpts.push_back(read_json_file(p));
  // env config defaults to the one the first checkpoint was trained with
  const nlohmann::json base = ckpts.front().contains("config") ? ckpts.front().at("config") : nlohmann::json::object();
  CommonOptions co = o;
  nlohmann::json trimmed = base;
  trimmed.erase("output_dir");
  const RunConfig cfg = resolve_config(co, &trimmed, false);
  if (cfg.environment == Environment::opinion) throw ConfigError("environment", "snapshots need flock or tag");
  const auto dir = output_dir(cfg, "snapshot");
  ensure_dir(dir);
  std::vector<std::string> files;
  if (cfg.environment == Environment::flock) {
    FlockEnv env(cfg.flock, cfg.workers);
    files = detail::snapshot(env, cfg, ckpts, s, dir, cfg.flock.world);
  } else {
    TagEnv env(cfg.tag, cfg.workers);
    files = detail::snapshot(env, cfg, ckpts, s, dir, cfg.tag.world);
  }
  write_manifest(dir, "snapshot", cfg, files);
  out << "wrote " << dir.string() << '\n';
  return kExitOk;
}

inline int cmd_validate(const CommonOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  const Derived d = derive(cfg);
  out << "environment=" << to_string(cfg.environment) << '\n';
  out << "n=" << d.n << '\n';
  if (cfg.environment != Environment::opinion) {
    out << "obs_dim=" << d.obs_dim << '\n';
    for (const auto& g : d.groups) {
      const std::string pre = d.groups.size() == 1 ? "" : g.name + ".";
      out << pre << "m=" << g.m << '\n';
      out << pre << "b=" << g.b << '\n';
      out << pre << "T*p*b=" << g.minibatch_updates << '\n';
    }
  } else {
    out << "T=" << cfg.ppo.T << '\n';
  }
  out << "valid\n";
  return kExitOk;
}

/// Entry point. args excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-agent simulation and PPO training harness", "swarm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SWARM_VERSION);

  CommonOptions common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON config file (or a run manifest)");
    sub->add_option("--seed", common.seed, "random seed");
    sub->add_option("--workers", common.workers, "worker threads");
    sub->add_option("--output", common.output, "output directory");
    sub->add_option("--set", common.sets, "override, key=value (repeatable)")->allow_extra_args(false);
  };
  auto* train = app.add_subcommand("train", "train policies and write metrics, checkpoints and a manifest");
  add_common(train);
  BenchmarkOptions bench;
  auto* benchmark = app.add_subcommand("benchmark", "time environment steps and training steps against n");
  add_common(benchmark);
  benchmark->add_option("--env", bench.env, "flock or tag");
  benchmark->add_option("--counts", bench.counts, "ascending comma-separated agent counts");
  benchmark->add_option("--steps", bench.steps, "timed environment steps per count");
  benchmark->add_option("--train-steps", bench.train_steps, "timed training steps per count (0 skips)");
  benchmark->add_option("--mode", bench.mode, "fixed-world, fixed-density or both");
  SnapshotOptions snap;
  auto* snapshot = app.add_subcommand("snapshot", "roll out a checkpoint with mean actions and export CSVs");
  add_common(snapshot);
  snapshot->add_option("--checkpoint", snap.checkpoints, "checkpoint file (repeat for tag)")->allow_extra_args(false);
  snapshot->add_option("--steps", snap.steps, "rollout steps");
  snapshot->add_option("--agent", snap.agent, "agent whose view is exported");
  snapshot->add_flag("--render", snap.render, "also write positions.svg and view.pgm");
  auto* validate_cmd = app.add_subcommand("validate", "check a config and print derived quantities");
  add_common(validate_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*train) return cmd_train(common, out);
    if (*benchmark) return cmd_benchmark(common, bench, out);
    if (*snapshot) return cmd_snapshot(common, snap, out);
    if (*validate_cmd) return cmd_validate(common, out);
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ContractError& e) {
    // a checkpoint that does not fit the environment is bad input
    if (*snapshot) {
      err << "invalid input: " << e.what() << '\n';
      return kExitInvalid;
    }
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitInvalid;
}

}  // namespace swarm::cli

#endif  // SWARM_CLI_HPP
