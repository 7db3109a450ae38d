#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "swarm/cli.hpp"

namespace fs = std::filesystem;
using namespace swarm;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& tag = "") {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  auto dir = fs::temp_directory_path() / "swarm_tests" / (std::string(info->test_suite_name()) + "_" + info->name() + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

csv::Table table(const fs::path& p) {
  std::ifstream f(p);
  return csv::read(f);
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// small and quick flock training run
const std::vector<std::string> kFastFlock{"--set", "n=64", "--set", "T=5", "--set", "t=16", "--set", "batch_size=128",
                                          "--set", "hidden=16", "--set", "v=16"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST(Validate, DefaultFlock) {
  const auto r = run({"validate"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("environment=flock"), std::string::npos);
  EXPECT_NE(r.out.find("obs_dim=129"), std::string::npos);
  EXPECT_NE(r.out.find("m=65536"), std::string::npos);
  EXPECT_NE(r.out.find("\nb=128\n"), std::string::npos);
  EXPECT_NE(r.out.find("T*p*b=51200"), std::string::npos);
  EXPECT_NE(r.out.find("valid"), std::string::npos);
}

TEST(Validate, TagGroups) {
  const auto r = run({"validate", "--set", "environment=tag"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("runner.m=57600"), std::string::npos);
  EXPECT_NE(r.out.find("chaser.b=12"), std::string::npos);
  EXPECT_NE(r.out.find("obs_dim=128"), std::string::npos);
}

TEST(Validate, RejectsBadInput) {
  EXPECT_EQ(run({"validate", "--set", "theta_max=4"}).code, 2);
  EXPECT_EQ(run({"validate", "--set", "no_such_key=1"}).code, 2);
  EXPECT_EQ(run({"validate", "--set", "threshold=0.5"}).code, 2);
  EXPECT_EQ(run({"validate", "--set", "n=2"}).code, 2);
  EXPECT_EQ(run({"validate", "--workers", "0"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  const auto r = run({"validate", "--set", "s_max=0.01"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("s_max"), std::string::npos);
}

TEST(Validate, ConfigFileAndOverrides) {
  const auto dir = scratch();
  write(dir / "c.json", R"({"environment": "flock", "n": 1000, "t": 64})");
  auto r = run({"validate", "--config", (dir / "c.json").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("m=64000"), std::string::npos);
  r = run({"validate", "--config", (dir / "c.json").string(), "--set", "t=128"});
  EXPECT_NE(r.out.find("m=128000"), std::string::npos);
  write(dir / "bad.json", "{not json");
  EXPECT_EQ(run({"validate", "--config", (dir / "bad.json").string()}).code, 2);
  EXPECT_EQ(run({"validate", "--config", (dir / "missing.json").string()}).code, 2);
}

TEST(Train, FlockWritesArtifacts) {
  const auto dir = scratch();
  const auto r = run(with({"train", "--seed", "4", "--output", dir.string()}, kFastFlock));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = table(dir / "metrics.csv");
  EXPECT_EQ(m.header, cli::kMetricsHeader);
  ASSERT_EQ(m.rows.size(), 5u);
  EXPECT_EQ(m.number(4, "training_step"), 5.0);
  EXPECT_EQ(table(dir / "timing.csv").rows.size(), 5u);
  EXPECT_TRUE(fs::exists(dir / "checkpoint.json"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["format"], "swarm-manifest");
  EXPECT_EQ(manifest["seed"], 4);
  EXPECT_EQ(manifest["config"]["n"], 64);
  EXPECT_EQ(manifest["build"]["nlohmann_json"], "3.11.3");
  const auto ck = nlohmann::json::parse(slurp(dir / "checkpoint.json"));
  EXPECT_EQ(ck["training_step"], 5);
  EXPECT_EQ(ck["policy"], "flock");
  EXPECT_EQ(ck["obs_dim"], 17);
}

TEST(Train, MetricsByteIdenticalAcrossRunsAndWorkers) {
  const auto a = scratch("a"), b = scratch("b"), c = scratch("c");
  ASSERT_EQ(run(with({"train", "--output", a.string()}, kFastFlock)).code, 0);
  ASSERT_EQ(run(with({"train", "--output", b.string()}, kFastFlock)).code, 0);
  ASSERT_EQ(run(with({"train", "--workers", "3", "--output", c.string()}, kFastFlock)).code, 0);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(c / "metrics.csv"));
  // the config echo names the output directory; everything else must match
  auto ca = nlohmann::json::parse(slurp(a / "checkpoint.json")), cb = nlohmann::json::parse(slurp(b / "checkpoint.json"));
  ca["config"].erase("output_dir");
  cb["config"].erase("output_dir");
  EXPECT_EQ(ca, cb);
}

TEST(Train, ManifestReproducesRun) {
  const auto a = scratch("a"), b = scratch("b");
  ASSERT_EQ(run(with({"train", "--seed", "9", "--output", a.string()}, kFastFlock)).code, 0);
  const auto r = run({"train", "--config", (a / "manifest.json").string(), "--output", b.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
}

TEST(Train, TagWritesTwoCheckpoints) {
  const auto dir = scratch();
  const auto r = run({"train", "--output", dir.string(), "--set", "environment=tag", "--set", "n_runners=30",
                      "--set", "n_chasers=8", "--set", "T=2", "--set", "t=16", "--set", "batch_size=64", "--set",
                      "hidden=8", "--set", "v=8"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "checkpoint_runner.json"));
  EXPECT_TRUE(fs::exists(dir / "checkpoint_chaser.json"));
  EXPECT_EQ(table(dir / "metrics_runner.csv").rows.size(), 2u);
  EXPECT_EQ(table(dir / "metrics_chaser.csv").rows.size(), 2u);
}

TEST(Train, DefaultOutputDirFromEnvironment) {
  const auto dir = scratch();
  setenv("SWARM_OUTPUT_DIR", dir.string().c_str(), 1);
  const auto r = run(with({"train", "--seed", "2"}, kFastFlock));
  unsetenv("SWARM_OUTPUT_DIR");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "train-flock-seed2" / "metrics.csv"));
}

TEST(Train, OpinionRun) {
  const auto dir = scratch();
  const auto r = run({"train", "--output", dir.string(), "--set", "environment=opinion", "--set", "n=20", "--set",
                      "T=10", "--set", "threshold=1.0", "--set", "strength=0.02"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(table(dir / "opinion.csv").rows.size(), 20u * 11u);
  const auto s = table(dir / "opinion_summary.csv");
  ASSERT_EQ(s.rows.size(), 11u);
  for (std::size_t k = 1; k < 11; ++k) EXPECT_LT(s.number(k, "spread"), s.number(k - 1, "spread"));
}

TEST(Benchmark, SingleCount) {
  const auto dir = scratch();
  const auto r = run({"benchmark", "--env", "flock", "--counts", "1000", "--steps", "2", "--train-steps", "0",
                      "--output", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = table(dir / "benchmark.csv");
  EXPECT_EQ(t.header, cli::kBenchmarkHeader);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.number(0, "n"), 1000.0);
  EXPECT_GT(t.number(0, "env_steps_per_sec"), 0.0);
  EXPECT_EQ(t.rows[0][t.column("density_mode")], "fixed-world");
}

TEST(Benchmark, BadCounts) {
  EXPECT_EQ(run({"benchmark", "--counts", "2000,1000"}).code, 2);
  EXPECT_EQ(run({"benchmark", "--counts", "ten"}).code, 2);
  EXPECT_EQ(run({"benchmark", "--mode", "sideways", "--counts", "10"}).code, 2);
  EXPECT_EQ(run({"benchmark", "--env", "opinion", "--counts", "10"}).code, 2);
}

TEST(Benchmark, DensityScaling) {
  RunConfig base;
  const auto c = benchmark_config(base, 4000, DensityMode::fixed_density);
  EXPECT_FLOAT_EQ(c.flock.world.width, 200.0f);
  EXPECT_EQ(c.flock.n, 4000u);
  RunConfig tag;
  tag.environment = Environment::tag;
  const auto t = benchmark_config(tag, 1000, DensityMode::fixed_world);
  EXPECT_EQ(t.tag.n_chasers, 100u);
  EXPECT_EQ(t.tag.n_runners, 900u);
  const double xs[3] = {1, 10, 100}, ys[3] = {2, 20, 200};
  EXPECT_NEAR(loglog_slope(xs, ys), 1.0, 1e-12);
}

class Snapshot : public ::testing::Test {
 protected:
  void SetUp() override {
    run_dir = scratch("_run");
    const auto r = run({"train", "--output", run_dir.string(), "--set", "n=3", "--set", "T=1", "--set", "t=4",
                        "--set", "batch_size=4", "--set", "hidden=8", "--set", "v=8", "--set", "width=10", "--set",
                        "height=10"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  fs::path run_dir;
};

TEST_F(Snapshot, RowCounts) {
  const auto dir = scratch();
  const auto r = run({"snapshot", "--checkpoint", (run_dir / "checkpoint.json").string(), "--steps", "1", "--output",
                      dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pos = table(dir / "positions.csv");
  EXPECT_EQ(pos.header.size(), 8u);
  EXPECT_EQ(pos.rows.size(), 3u);
  const auto view = table(dir / "view.csv");
  EXPECT_EQ(view.header.size(), 9u);
  ASSERT_EQ(view.rows.size(), 1u);
  for (std::size_t c = 1; c < view.header.size(); ++c) {
    const double v = view.number(0, view.header[c]);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST_F(Snapshot, RenderAndAgent) {
  const auto dir = scratch();
  const auto r = run({"snapshot", "--checkpoint", (run_dir / "checkpoint.json").string(), "--steps", "5", "--agent",
                      "2", "--render", "--output", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(table(dir / "positions.csv").rows.size(), 15u);
  EXPECT_EQ(slurp(dir / "view.pgm").substr(0, 10), "P2\n8 5\n255");
  EXPECT_NE(slurp(dir / "positions.svg").find("<circle"), std::string::npos);
  EXPECT_EQ(run({"snapshot", "--checkpoint", (run_dir / "checkpoint.json").string(), "--agent", "3", "--output",
                 dir.string()})
                .code,
            2);
}

TEST_F(Snapshot, ZeroPolicyKeepsSpeed) {
  auto ck = nlohmann::json::parse(slurp(run_dir / "checkpoint.json"));
  for (auto& block : ck["parameters"])
    for (auto& v : block["values"]) v = 0.0;
  const auto dir = scratch();
  write(dir / "zero.json", ck.dump());
  const auto r = run({"snapshot", "--checkpoint", (dir / "zero.json").string(), "--steps", "3", "--output",
                      (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  // zero mean actions: no acceleration, no turn, speed stays at its initial value
  const auto pos = table(dir / "out" / "positions.csv");
  for (std::size_t k = 0; k < pos.rows.size(); ++k) EXPECT_FLOAT_EQ(pos.number(k, "speed"), 0.275f);
}

TEST_F(Snapshot, DimensionMismatchIsInvalid) {
  const auto r = run({"snapshot", "--checkpoint", (run_dir / "checkpoint.json").string(), "--set", "v=16",
                      "--output", scratch().string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("obs_dim"), std::string::npos);
  EXPECT_EQ(run({"snapshot", "--output", scratch("b").string()}).code, 2);
}

TEST(Csv, RoundTrip) {
  std::ostringstream out;
  csv::Writer w(out);
  w.header({"a", "b", "c"});
  w.field(1).field(0.1).field(std::string("x")).end_row();
  w.field(-2).field(1e-300).field(std::string("y")).end_row();
  const auto t = csv::read_string(out.str());
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.number(0, "b"), 0.1);
  EXPECT_EQ(t.number(1, "b"), 1e-300);
  EXPECT_EQ(t.rows[1][2], "y");
  EXPECT_THROW(csv::read_string("a,b\n1\n"), Error);
  EXPECT_THROW(t.column("zz"), Error);
}
