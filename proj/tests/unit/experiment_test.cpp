#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "gridplan/experiment.hpp"

using namespace gridplan;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& tag) {
  const auto p = fs::temp_directory_path() / ("gridplan_experiment_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ExperimentConfig small_pipeline(const fs::path& out) {
  auto c = parse_experiment_config(nlohmann::json::parse(R"({
    "seed": 5,
    "scenarios": {"days": 9},
    "split": {"train": 3, "in_distribution": 3, "out_of_distribution": 3},
    "agent": "greedy",
    "beam": 2,
    "training": {"iterations": 2, "batch_episodes": 8, "eval_interval": 1, "hidden": 16}
  })"));
  c.out = out.string();
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GRIDPLAN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(Config, DefaultsAndSeedOverride) {
  const auto c = parse_experiment_config(nlohmann::json::parse(R"({"seed": 42})"));
  EXPECT_EQ(c.scenario_seed, 42u);
  EXPECT_EQ(c.split_seed, 42u);
  EXPECT_EQ(c.training.seed, 42u);
  EXPECT_EQ(c.agent, "ssa");
  EXPECT_EQ(c.hv_reference, kHypervolumeReference);
  EXPECT_EQ(c.ssa_weights.w2, 0.7);
  EXPECT_EQ(c.aza_weights.w1, 0.95);
}

TEST(Config, ShippedConfigRoundTrips) {
  const auto c = load_experiment_config(std::string(GRIDPLAN_SOURCE_DIR) + "/configs/desk14.json");
  const auto j = experiment_config_to_json(c);
  EXPECT_EQ(experiment_config_to_json(parse_experiment_config(j)), j);
  EXPECT_EQ(c.split.train, 20);
  EXPECT_EQ(c.split.in_distribution, 10);
  EXPECT_EQ(c.split.out_of_distribution, 20);
}

TEST(Config, RejectsMalformedInput) {
  const char* bad[] = {
      R"([1, 2])",
      R"({"unknown": 1})",
      R"({"training": {"learning_rat": 0.1}})",
      R"({"beam": "wide"})",
      R"({"reward_weights": {"ssa": [1.0]}})",
      R"({"hypervolume_reference": [3.1]})",
      R"({"experts": "manual"})",
      R"({"experts": [{"name": "x", "substations": {"a": "AB"}}]})",
  };
  for (const char* text : bad) EXPECT_THROW(parse_experiment_config(nlohmann::json::parse(text)), ValidationError) << text;
  auto c = parse_experiment_config(nlohmann::json::object());
  c.agent = "other";
  EXPECT_THROW(c.validate(), ValidationError);
  c = parse_experiment_config(nlohmann::json::object());
  c.training.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_THROW(load_experiment_config("/nonexistent/config.json"), ValidationError);
}

TEST(Pipeline, GreedyRunsWithoutCheckpointAndReplays) {
  const auto dir = scratch("greedy");
  auto c = small_pipeline(dir);
  EXPECT_THROW(run_plan(c), ValidationError);
  const auto s = run_generate(c);
  EXPECT_EQ(s.days, 9);
  EXPECT_EQ(s.train + s.in_distribution + s.out_of_distribution, 9);
  EXPECT_THROW(run_train(c), ValidationError);
  c.jobs = 2;
  const auto secs = run_plan(c);
  EXPECT_EQ(secs.size(), 9u);
  EXPECT_FALSE(fs::exists(dir / "policy.json"));
  const auto r = run_evaluate(c);
  EXPECT_EQ(r.approaches.front(), "Greedy + SSP");
  EXPECT_EQ(r.approaches.back(), "Expert Set");
  EXPECT_EQ(r.days.size(), 9 * r.approaches.size());
  for (const char* f : {"days.csv", "splits.csv", "hypervolume.svg", "best_max_rho.svg", "solved_days.svg",
                        "n_switching.svg"})
    EXPECT_TRUE(fs::exists(dir / "report" / f)) << f;
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  for (const char* stage : {"generate", "plan", "evaluate"}) EXPECT_TRUE(manifest["stages"].contains(stage)) << stage;
  EXPECT_EQ(manifest["config"]["scenarios"]["seed"], 5);

  // A tampered objective no longer replays.
  const auto plan_file = dir / "plans" / "day_0000.json";
  ASSERT_TRUE(fs::exists(plan_file));
  auto doc = nlohmann::json::parse(slurp(plan_file));
  doc["plans"][0]["max_rho_n1"] = doc["plans"][0]["max_rho_n1"].get<double>() + 0.5;
  write_file(plan_file, doc.dump());
  EXPECT_THROW(run_evaluate(c), Error);
  fs::remove_all(dir);
}

TEST(Pipeline, ArtifactsAreIndependentOfWorkerCount) {
  const auto a = scratch("jobs1"), b = scratch("jobs3");
  auto ca = small_pipeline(a), cb = small_pipeline(b);
  ca.jobs = 1;
  cb.jobs = 3;
  for (auto* c : {&ca, &cb}) {
    run_generate(*c);
    run_plan(*c);
    run_evaluate(*c);
  }
  for (const char* f : {"grid.json", "scenarios.csv", "split.json", "report/days.csv", "report/splits.csv",
                        "report/hypervolume.svg"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  int plans = 0;
  for (const auto& e : fs::directory_iterator(a / "plans")) {
    EXPECT_EQ(slurp(e.path()), slurp(b / "plans" / e.path().filename())) << e.path();
    ++plans;
  }
  EXPECT_EQ(plans, 9);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Pipeline, CheckpointKindMustMatchAgent) {
  const auto dir = scratch("kind");
  auto c = small_pipeline(dir);
  c.agent = "ssa";
  run_generate(c);
  const auto r = run_train(c);
  EXPECT_EQ(r.curve.size(), 3u);
  EXPECT_TRUE(fs::exists(dir / "training_curve.csv"));
  run_plan(c, {0});
  EXPECT_TRUE(fs::exists(dir / "plans" / "day_0000.json"));
  c.agent = "aza";
  EXPECT_THROW(run_plan(c, {0}), ValidationError);
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  const std::string out = (dir / "run").string();
  write_file(dir / "ok.json", R"({"seed": 2, "scenarios": {"days": 6},
    "split": {"train": 2, "in_distribution": 2, "out_of_distribution": 2}, "agent": "greedy", "beam": 1})");
  write_file(dir / "bad.json", R"({"seed": 2, "colour": "blue"})");
  write_file(dir / "broken.json", "{");
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("generate --config " + (dir / "bad.json").string()), 1);
  EXPECT_EQ(run_cli("generate --config " + (dir / "broken.json").string()), 1);
  EXPECT_EQ(run_cli("generate --config " + (dir / "missing.json").string()), 1);
  EXPECT_EQ(run_cli("evaluate --config " + (dir / "ok.json").string() + " --out " + out), 1);
  EXPECT_EQ(run_cli("generate --config " + (dir / "ok.json").string() + " --out " + out), 0);
  EXPECT_EQ(run_cli("train --config " + (dir / "ok.json").string() + " --out " + out), 1);
  EXPECT_EQ(run_cli("plan --config " + (dir / "ok.json").string() + " --out " + out + " --agent ssa"), 1);
  EXPECT_EQ(run_cli("plan --config " + (dir / "ok.json").string() + " --out " + out + " --days 0"), 0);
  EXPECT_EQ(run_cli("generate --config " + (dir / "ok.json").string() + " --out /proc/gridplan_denied"), 2);
  fs::remove_all(dir);
}
