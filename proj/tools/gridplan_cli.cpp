#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gridplan/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> agent;
  std::optional<std::string> out;
};

gridplan::ExperimentConfig resolve(const Overrides& o) {
  gridplan::ExperimentConfig c;
  if (!o.config.empty()) c = gridplan::load_experiment_config(o.config);
  if (o.seed) c.override_seed(*o.seed);
  if (o.jobs) c.jobs = *o.jobs;
  if (o.agent) c.agent = *o.agent;
  if (o.out) c.out = *o.out;
  c.validate();
  return c;
}

void say(const std::string& line) { std::cout << line << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Day-ahead topology planning experiments"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "overrides every stage seed");
  app.add_option("--jobs", o.jobs, "planning workers (0: all cores)");
  app.add_option("--agent", o.agent, "greedy | ssa | aza")->check(CLI::IsMember({"greedy", "ssa", "aza"}));
  app.add_option("--out", o.out, "artifact directory");

  auto* gen = app.add_subcommand("generate", "write grid, scenarios and split");
  auto* train = app.add_subcommand("train", "train the agent on the train split");
  auto* plan = app.add_subcommand("plan", "write per-day plan documents");
  std::vector<int> days;
  plan->add_option("--days", days, "day ids (default: every split day)");
  auto* eval = app.add_subcommand("evaluate", "replay plans, run baselines, write the report");
  for (auto* sub : {gen, train, plan, eval}) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "overrides every stage seed");
    sub->add_option("--jobs", o.jobs, "planning workers (0: all cores)");
    sub->add_option("--agent", o.agent, "greedy | ssa | aza")->check(CLI::IsMember({"greedy", "ssa", "aza"}));
    sub->add_option("--out", o.out, "artifact directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const auto cfg = resolve(o);
    if (gen->parsed()) {
      gridplan::run_generate(cfg, say);
    } else if (train->parsed()) {
      const auto r = gridplan::run_train(cfg, say);
      say("checkpoint written to " + (std::filesystem::path(cfg.out) / "policy.json").string() + " (" +
          std::to_string(r.curve.size()) + " curve rows)");
    } else if (plan->parsed()) {
      const auto secs = gridplan::run_plan(cfg, days, say);
      double worst = 0.0;
      for (double s : secs) worst = std::max(worst, s);
      say(std::to_string(secs.size()) + " days planned, slowest " + std::to_string(worst) + " s");
    } else if (eval->parsed()) {
      gridplan::run_evaluate(cfg, say);
      say("report written to " + (std::filesystem::path(cfg.out) / "report").string());
    }
  } catch (const gridplan::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
