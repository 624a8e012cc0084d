#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& work() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "eigenet_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

/// Runs the CLI and returns its exit code; output goes to a log file.
int run(const std::string& args) {
  const std::string cmd = std::string(EIGENET_CLI_PATH) + " " + args + " >>" + (work() / "cli.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

std::size_t csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n - 1;
}

/// Desk-sized pipeline config small enough for a unit test.
const fs::path& config() {
  static const fs::path p = [] {
    const nlohmann::json cfg = {
        {"corpus",
         {{"scenes", 4},
          {"train_ratio", 0.5},
          {"sampler", {{"num_sources", 10}, {"max_order", 3}, {"depth_height", 8}, {"depth_width", 16}}}}},
        {"codec", {{"latent_dim", 4}, {"channels", {2, 2, 2}}}},
        {"codec_training",
         {{"max_steps", 2},
          {"min_steps", 2},
          {"batch", 1},
          {"eval_every", 2},
          {"log_every", 1},
          {"gate", {{"edt", 1e9}, {"c50", 1e9}, {"t60", 1e9}}}}},
        {"model",
         {{"f", 16}, {"heads", 2}, {"blocks", 1}, {"depth_height", 8}, {"depth_width", 16}, {"patch_h", 4},
          {"patch_w", 8}, {"vit_dim", 8}, {"vit_layers", 1}, {"vit_heads", 2}, {"coord_freqs", 2},
          {"coord_hidden", 8}, {"coord_dim", 8}, {"proxy_pe_dim", 8}}},
        {"training", {{"steps", 2}, {"batch", 1}, {"log_every", 1}}},
        {"evaluation", {{"seeds", {0}}, {"targets_per_scene", 2}}}};
    const auto path = work() / "config.json";
    std::ofstream(path) << cfg.dump(2);
    return path;
  }();
  return p;
}

std::string with_config(const std::string& args) { return "--config " + config().string() + " " + args; }

/// Corpus, codec and model shared by the pipeline tests, built once.
struct Pipeline {
  fs::path data = work() / "data", codec = work() / "codec", model = work() / "model";
  bool ok = false;

  static const Pipeline& get() {
    static const Pipeline p = [] {
      Pipeline q;
      q.ok = run(with_config("simulate --out " + q.data.string())) == 0 &&
             run(with_config("pretrain-codec --data " + q.data.string() + " --out " + q.codec.string())) == 0 &&
             run(with_config("--deterministic train --data " + q.data.string() + " --codec " + q.codec.string() +
                             " --out " + q.model.string())) == 0;
      return q;
    }();
    return p;
  }
  std::string inputs() const { return " --data " + data.string() + " --codec " + codec.string(); }
};

}  // namespace

TEST(CliUsage, MissingOutIsUsageError) { EXPECT_EQ(run("simulate --scenes 2"), 2); }

TEST(CliUsage, NoSubcommandIsUsageError) { EXPECT_EQ(run(""), 2); }

TEST(CliUsage, BadEnumIsUsageError) {
  EXPECT_EQ(run("train --data " + work().string() + " --codec x --out y --attention xx"), 2);
  EXPECT_EQ(run("train --data " + work().string() + " --codec x --out y --spectrum stft"), 2);
}

TEST(CliUsage, MissingInputDirectoryIsUsageError) {
  EXPECT_EQ(run("pretrain-codec --data " + (work() / "nope").string() + " --out z"), 2);
}

TEST(CliSimulate, DeterministicTrees) {
  const auto a = work() / "sim_a", b = work() / "sim_b";
  ASSERT_EQ(run(with_config("simulate --scenes 2 --seed 0 --out " + a.string())), 0);
  ASSERT_EQ(run(with_config("simulate --scenes 2 --seed 0 --out " + b.string())), 0);
  const auto ta = tree(a), tb = tree(b);
  EXPECT_GT(ta.size(), 4u);
  EXPECT_EQ(ta, tb);
  EXPECT_TRUE(ta.count("resolved_config.json"));
}

TEST(CliSimulate, RefusesNonEmptyOutput) {
  const auto dir = work() / "occupied";
  fs::create_directories(dir);
  std::ofstream(dir / "keep.txt") << "x";
  EXPECT_EQ(run(with_config("simulate --scenes 2 --out " + dir.string())), 1);
  EXPECT_TRUE(fs::exists(dir / "keep.txt"));
  EXPECT_EQ(run(with_config("simulate --scenes 2 --force --out " + dir.string())), 0);
  EXPECT_FALSE(fs::exists(dir / "keep.txt"));
}

TEST(CliPipeline, TrainWritesLineage) {
  const auto& p = Pipeline::get();
  ASSERT_TRUE(p.ok) << "see " << (work() / "cli.log");
  const auto resolved = nlohmann::json::parse(slurp(p.model / "resolved_config.json"));
  EXPECT_EQ(resolved.at("command"), "train");
  EXPECT_TRUE(resolved.at("inputs").contains("codec_hash"));
  EXPECT_TRUE(resolved.contains("config_hash"));
  EXPECT_EQ(csv_rows(p.model / "train_log.jsonl") + 1, 2u);

  const auto again = work() / "model_again";
  ASSERT_EQ(run(with_config("--deterministic train" + p.inputs() + " --out " + again.string())), 0);
  EXPECT_EQ(tree(p.model / "checkpoint"), tree(again / "checkpoint"));
}

TEST(CliPipeline, EvaluateEmitsThreeRowsPerMethod) {
  const auto& p = Pipeline::get();
  ASSERT_TRUE(p.ok);
  const auto out = work() / "eval";
  ASSERT_EQ(run(with_config("evaluate" + p.inputs() + " --model " + p.model.string() + " --k 1,4,8 --out " +
                            out.string())),
            0);
  EXPECT_EQ(csv_rows(out / "metrics.csv"), 5u * 3u);

  const auto svg = work() / "svg";
  ASSERT_EQ(run("report --in " + out.string() + " --out " + svg.string()), 0);
  EXPECT_TRUE(fs::exists(svg / "k_scaling_c50_error_db.svg"));
  EXPECT_EQ(run("report --in " + work().string()), 1);
}

TEST(CliPipeline, ProbeGrid) {
  const auto& p = Pipeline::get();
  ASSERT_TRUE(p.ok);
  const auto out = work() / "probe";
  ASSERT_EQ(run(with_config("probe" + p.inputs() + " --model " + p.model.string() +
                            " --mode ac --keep 0,1,4 --out " + out.string())),
            0);
  EXPECT_EQ(csv_rows(out / "probe.csv"), 4u);
  EXPECT_EQ(run(with_config("probe" + p.inputs() + " --model " + p.model.string() + " --mode xx --out " +
                            (work() / "probe_bad").string())),
            2);
}

TEST(CliPipeline, HashChainIsEnforced) {
  const auto& p = Pipeline::get();
  ASSERT_TRUE(p.ok);
  const auto other = work() / "codec_other";
  ASSERT_EQ(run(with_config("pretrain-codec --seed 7 --data " + p.data.string() + " --out " + other.string())), 0);
  EXPECT_EQ(run(with_config("evaluate --data " + p.data.string() + " --codec " + other.string() + " --model " +
                            p.model.string() + " --out " + (work() / "eval_bad").string())),
            1);
  EXPECT_EQ(run(with_config("train" + std::string(" --data ") + p.data.string() + " --codec " +
                            (work() / "missing").string() + " --out " + (work() / "train_bad").string())),
            1);
}
