#pragma once

// Experiment configuration and the four pipeline stages
// (generate -> train -> plan -> evaluate). Every artifact lives under the
// configured output directory next to a manifest.
//
// Layout of <out>/:
//   grid.json, scenarios.csv, split.json      generate
//   policy.json, training_curve.csv           train
//   plans/day_NNNN.json, plan_timings.csv     plan
//   report/*.csv, report/*.svg                evaluate
//   manifest.json                             every stage

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridplan/agents.hpp"
#include "gridplan/grid_io.hpp"
#include "gridplan/planner.hpp"
#include "gridplan/report.hpp"
#include "gridplan/scenario.hpp"
#include "gridplan/synthetic.hpp"

namespace gridplan {

/// An expert topology: per-substation line-end buses (in the substation's
/// line-end order, injections stay on A) plus disabled lines.
struct ExpertSpec {
  std::string name;
  std::map<int, std::string> substations;
  std::vector<int> disable_lines;
};

struct ExperimentConfig {
  std::string grid_path;  // empty: synthetic desk grid
  SyntheticGridParams synthetic;
  std::string scenario_path;  // empty: generated days
  int days = 50;
  std::uint64_t scenario_seed = 7;
  double congestion_fraction = 0.9;
  double surge_min = 0.4;
  double surge_max = 0.8;
  double noise = 0.04;
  double drift = 0.1;
  SplitCounts split{20, 10, 20};
  std::uint64_t split_seed = 7;
  std::string agent = "ssa";  // greedy | ssa | aza
  int beam = 4;
  TrainingConfig training;
  RewardWeights ssa_weights = RewardWeights::ssa();
  RewardWeights aza_weights = RewardWeights::aza();
  ObjectivePoint hv_reference = kHypervolumeReference;
  bool auto_experts = true;
  std::vector<ExpertSpec> experts;
  std::string out = "run";
  int jobs = 0;  // 0: available parallelism

  void override_seed(std::uint64_t seed) {
    scenario_seed = seed;
    split_seed = seed;
    training.seed = seed;
  }

  void validate() const {
    if (agent != "greedy" && agent != "ssa" && agent != "aza")
      throw ValidationError("agent must be one of greedy, ssa, aza");
    if (days < 1) throw ValidationError("day count must be positive");
    if (beam < 1) throw ValidationError("beam width must be positive");
    if (!(hv_reference.max_rho > 0.0) || hv_reference.n_switching < 1)
      throw ValidationError("hypervolume reference must be positive");
    if (jobs < 0) throw ValidationError("jobs must be non-negative");
    if (out.empty()) throw ValidationError("output directory must be set");
    training.validate();
  }
};

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& dst) {
  if (auto it = j.find(key); it != j.end()) dst = it->template get<T>();
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) throw ValidationError("unknown key '" + it.key() + "' in " + where);
  }
}

inline RewardWeights read_weights(const nlohmann::json& j) {
  const auto w = j.get<std::vector<double>>();
  if (w.size() < 2 || w.size() > 3) throw ValidationError("reward weights need two or three entries");
  return {w[0], w[1], w.size() == 3 ? w[2] : 0.0};
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  using detail::read_field;
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    detail::check_keys(j,
                       {"seed", "grid", "scenarios", "split", "agent", "beam", "training", "reward_weights",
                        "hypervolume_reference", "experts", "out", "jobs"},
                       "config");
    if (auto g = j.find("grid"); g != j.end()) {
      detail::check_keys(*g, {"path", "synthetic"}, "grid");
      read_field(*g, "path", c.grid_path);
      if (auto s = g->find("synthetic"); s != g->end()) {
        detail::check_keys(*s,
                           {"limit_margin", "limit_floor_fraction", "weak_lines", "weak_margin", "calibration_days",
                            "calibration_seed"},
                           "grid.synthetic");
        read_field(*s, "limit_margin", c.synthetic.limit_margin);
        read_field(*s, "limit_floor_fraction", c.synthetic.limit_floor_fraction);
        read_field(*s, "weak_lines", c.synthetic.weak_lines);
        read_field(*s, "weak_margin", c.synthetic.weak_margin);
        read_field(*s, "calibration_days", c.synthetic.calibration_days);
        read_field(*s, "calibration_seed", c.synthetic.calibration_seed);
      }
    }
    if (auto s = j.find("scenarios"); s != j.end()) {
      detail::check_keys(*s, {"path", "days", "seed", "congestion_fraction", "surge_min", "surge_max", "noise", "drift"},
                         "scenarios");
      read_field(*s, "path", c.scenario_path);
      read_field(*s, "days", c.days);
      read_field(*s, "seed", c.scenario_seed);
      read_field(*s, "congestion_fraction", c.congestion_fraction);
      read_field(*s, "surge_min", c.surge_min);
      read_field(*s, "surge_max", c.surge_max);
      read_field(*s, "noise", c.noise);
      read_field(*s, "drift", c.drift);
    }
    if (auto s = j.find("split"); s != j.end()) {
      detail::check_keys(*s, {"train", "in_distribution", "out_of_distribution", "seed"}, "split");
      read_field(*s, "train", c.split.train);
      read_field(*s, "in_distribution", c.split.in_distribution);
      read_field(*s, "out_of_distribution", c.split.out_of_distribution);
      read_field(*s, "seed", c.split_seed);
    }
    read_field(j, "agent", c.agent);
    read_field(j, "beam", c.beam);
    if (auto t = j.find("training"); t != j.end()) {
      auto& tc = c.training;
      detail::check_keys(*t,
                         {"gamma", "learning_rate", "clip", "batch_episodes", "iterations", "seed", "epochs",
                          "minibatch", "entropy_coef", "value_coef", "hidden", "eval_interval", "divergence_patience",
                          "monitored_lines", "nearest", "target_substations", "target_cap", "simulations",
                          "candidates", "c_puct", "days_per_iteration", "insecure_start_weight"},
                         "training");
      read_field(*t, "gamma", tc.gamma);
      read_field(*t, "learning_rate", tc.learning_rate);
      read_field(*t, "clip", tc.clip);
      read_field(*t, "batch_episodes", tc.batch_episodes);
      read_field(*t, "iterations", tc.iterations);
      read_field(*t, "seed", tc.seed);
      read_field(*t, "epochs", tc.epochs);
      read_field(*t, "minibatch", tc.minibatch);
      read_field(*t, "entropy_coef", tc.entropy_coef);
      read_field(*t, "value_coef", tc.value_coef);
      read_field(*t, "hidden", tc.hidden);
      read_field(*t, "eval_interval", tc.eval_interval);
      read_field(*t, "divergence_patience", tc.divergence_patience);
      read_field(*t, "monitored_lines", tc.monitored_lines);
      read_field(*t, "nearest", tc.nearest);
      read_field(*t, "target_substations", tc.targets.substations);
      read_field(*t, "target_cap", tc.targets.cap);
      read_field(*t, "simulations", tc.simulations);
      read_field(*t, "candidates", tc.candidates);
      read_field(*t, "c_puct", tc.c_puct);
      read_field(*t, "days_per_iteration", tc.days_per_iteration);
      read_field(*t, "insecure_start_weight", tc.insecure_start_weight);
    }
    if (auto w = j.find("reward_weights"); w != j.end()) {
      detail::check_keys(*w, {"ssa", "aza"}, "reward_weights");
      if (w->contains("ssa")) c.ssa_weights = detail::read_weights(w->at("ssa"));
      if (w->contains("aza")) c.aza_weights = detail::read_weights(w->at("aza"));
    }
    if (auto r = j.find("hypervolume_reference"); r != j.end()) {
      const auto v = r->get<std::vector<double>>();
      if (v.size() != 2) throw ValidationError("hypervolume reference needs two entries");
      c.hv_reference = {v[0], static_cast<int>(v[1])};
    }
    if (auto e = j.find("experts"); e != j.end()) {
      if (e->is_string()) {
        if (e->get<std::string>() != "auto") throw ValidationError("experts must be \"auto\" or a list");
        c.auto_experts = true;
      } else {
        c.auto_experts = false;
        for (const auto& x : *e) {
          detail::check_keys(x, {"name", "substations", "disable_lines"}, "experts");
          ExpertSpec s;
          s.name = x.at("name").get<std::string>();
          if (auto subs = x.find("substations"); subs != x.end())
            for (auto it = subs->begin(); it != subs->end(); ++it) s.substations[std::stoi(it.key())] = it->get<std::string>();
          read_field(x, "disable_lines", s.disable_lines);
          c.experts.push_back(std::move(s));
        }
      }
    }
    read_field(j, "out", c.out);
    read_field(j, "jobs", c.jobs);
    if (auto s = j.find("seed"); s != j.end()) c.override_seed(s->get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ValidationError("expert substation keys must be integers");
  }
  return c;
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
  const auto& t = c.training;
  nlohmann::json experts = "auto";
  if (!c.auto_experts) {
    experts = nlohmann::json::array();
    for (const auto& e : c.experts) {
      nlohmann::json subs = nlohmann::json::object();
      for (const auto& [s, buses] : e.substations) subs[std::to_string(s)] = buses;
      experts.push_back({{"name", e.name}, {"substations", subs}, {"disable_lines", e.disable_lines}});
    }
  }
  return {
      {"grid",
       {{"path", c.grid_path},
        {"synthetic",
         {{"limit_margin", c.synthetic.limit_margin},
          {"limit_floor_fraction", c.synthetic.limit_floor_fraction},
          {"weak_lines", c.synthetic.weak_lines},
          {"weak_margin", c.synthetic.weak_margin},
          {"calibration_days", c.synthetic.calibration_days},
          {"calibration_seed", c.synthetic.calibration_seed}}}}},
      {"scenarios",
       {{"path", c.scenario_path},
        {"days", c.days},
        {"seed", c.scenario_seed},
        {"congestion_fraction", c.congestion_fraction},
        {"surge_min", c.surge_min},
        {"surge_max", c.surge_max},
        {"noise", c.noise},
        {"drift", c.drift}}},
      {"split",
       {{"train", c.split.train},
        {"in_distribution", c.split.in_distribution},
        {"out_of_distribution", c.split.out_of_distribution},
        {"seed", c.split_seed}}},
      {"agent", c.agent},
      {"beam", c.beam},
      {"training",
       {{"gamma", t.gamma},
        {"learning_rate", t.learning_rate},
        {"clip", t.clip},
        {"batch_episodes", t.batch_episodes},
        {"iterations", t.iterations},
        {"seed", t.seed},
        {"epochs", t.epochs},
        {"minibatch", t.minibatch},
        {"entropy_coef", t.entropy_coef},
        {"value_coef", t.value_coef},
        {"hidden", t.hidden},
        {"eval_interval", t.eval_interval},
        {"divergence_patience", t.divergence_patience},
        {"monitored_lines", t.monitored_lines},
        {"nearest", t.nearest},
        {"target_substations", t.targets.substations},
        {"target_cap", t.targets.cap},
        {"simulations", t.simulations},
        {"candidates", t.candidates},
        {"c_puct", t.c_puct},
        {"days_per_iteration", t.days_per_iteration},
        {"insecure_start_weight", t.insecure_start_weight}}},
      {"reward_weights",
       {{"ssa", {c.ssa_weights.w1, c.ssa_weights.w2, c.ssa_weights.w3}},
        {"aza", {c.aza_weights.w1, c.aza_weights.w2}}}},
      {"hypervolume_reference", {c.hv_reference.max_rho, c.hv_reference.n_switching}},
      {"experts", experts},
      {"out", c.out},
      {"jobs", c.jobs},
  };
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  try {
    return parse_experiment_config(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

inline TopologyConfig expert_topology(const Grid& grid, const ExpertSpec& spec) {
  TopologyConfig t = TopologyConfig::reference(grid);
  for (const auto& [s, buses] : spec.substations) {
    if (s < 0 || s >= grid.substation_count())
      throw ValidationError("expert '" + spec.name + "' names unknown substation " + std::to_string(s));
    const auto& ends = grid.line_ends_at(s);
    if (buses.size() != ends.size())
      throw ValidationError("expert '" + spec.name + "' needs " + std::to_string(ends.size()) +
                            " bus labels at substation " + std::to_string(s));
    for (std::size_t i = 0; i < ends.size(); ++i) {
      if (buses[i] != 'A' && buses[i] != 'B') throw ValidationError("expert bus labels must be A or B");
      t.set_end_bus(ends[i], buses[i] == 'A' ? Bus::A : Bus::B);
    }
    detail::check_not_stranded(grid, t, s);
  }
  for (int l : spec.disable_lines) {
    if (l < 0 || l >= grid.line_count()) throw ValidationError("expert '" + spec.name + "' disables unknown line");
    t.set_line_online(l, false);
  }
  if (topological_depth(grid, t) > kMaxDepth) throw ValidationError("expert '" + spec.name + "' is too deep");
  if (!is_connected(grid, t)) throw ValidationError("expert '" + spec.name + "' islands the grid");
  return t;
}

/// Data-driven expert choice on the training days: the best split of the
/// most connected substation, the best single line to disable, and their
/// combination. "Best" = most days whose daily max N-1 loading is below 1,
/// then lowest median daily maximum, then enumeration order.
inline std::vector<ExpertTopology> select_expert_topologies(ScreeningCache& cache,
                                                            const std::vector<const DayScenario*>& train) {
  const Grid& grid = cache.grid();
  const auto ref = TopologyConfig::reference(grid);
  auto score = [&](const TopologyConfig& t) {
    std::vector<double> daily;
    int solved = 0;
    for (const auto* d : train) {
      double m = 0.0;
      for (int h = 1; h <= kHours; ++h) m = std::max(m, cache.screen(t, d->at(h)).max_rho);
      daily.push_back(m);
      solved += m < 1.0 ? 1 : 0;
    }
    std::sort(daily.begin(), daily.end());
    return std::make_pair(solved, -quantile_sorted(daily, 0.5));
  };
  std::vector<ExpertTopology> out;
  const int hub = most_connected_substations(grid, 1).at(0);
  std::optional<std::pair<TopologyConfig, std::pair<int, double>>> best1, best2;
  for (const auto& split : enumerate_splits(grid, hub, 2)) {
    TopologyConfig t = ref;
    t.set_local(grid, hub, split);
    if (!is_connected(grid, t)) continue;
    const auto s = score(t);
    if (!best1 || s > best1->second) best1 = {t, s};
  }
  for (int l = 0; l < grid.line_count(); ++l) {
    TopologyConfig t = ref;
    t.set_line_online(l, false);
    if (!is_connected(grid, t)) continue;
    const auto s = score(t);
    if (!best2 || s > best2->second) best2 = {t, s};
  }
  if (best1) out.push_back({"Expert 1", best1->first});
  if (best2) out.push_back({"Expert 2", best2->first});
  if (best1 && best2) {
    TopologyConfig both = best1->first;
    for (int l = 0; l < grid.line_count(); ++l)
      if (!best2->first.line_online(l)) both.set_line_online(l, false);
    if (is_connected(grid, both)) out.push_back({"Expert 1&2", both});
  }
  return out;
}

// ---------------------------------------------------------------------------

using Logger = std::function<void(const std::string&)>;

namespace detail {

inline std::filesystem::path out_dir(const ExperimentConfig& c) { return std::filesystem::path(c.out); }

inline nlohmann::json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ValidationError("missing artifact " + p.string() + " (run the earlier stage first)");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("artifact " + p.string() + " is not valid JSON: " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& p, const nlohmann::json& j) {
  write_text(p, j.dump(2) + "\n");
}

inline void record_stage(const ExperimentConfig& c, const std::string& stage, const std::vector<std::string>& files,
                         const nlohmann::json& seeds) {
  const auto path = out_dir(c) / "manifest.json";
  nlohmann::json m = nlohmann::json::object();
  if (std::filesystem::exists(path)) m = read_json_file(path);
  m["config"] = experiment_config_to_json(c);
  m["stages"][stage] = {{"files", files}, {"seeds", seeds}};
  write_json_file(path, m);
}

inline std::string day_file(int day) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "day_%04d.json", day);
  return buf;
}

inline std::string approach_label(const std::string& agent) {
  if (agent == "ssa") return "SSA + SSP";
  if (agent == "aza") return "AZA + SSP";
  return "Greedy + SSP";
}

}  // namespace detail

/// Grid, days, split and experts as written by the generate stage.
struct Workspace {
  Grid grid;
  std::vector<DayScenario> days;
  DatasetSplit split;
  std::vector<ExpertTopology> experts;

  const DayScenario& day(int id) const {
    for (const auto& d : days)
      if (d.id == id) return d;
    throw ValidationError("unknown day " + std::to_string(id));
  }
  std::vector<const DayScenario*> select(const std::vector<int>& ids) const {
    std::vector<const DayScenario*> out;
    for (int id : ids) out.push_back(&day(id));
    return out;
  }
  std::vector<std::pair<std::string, std::vector<int>>> labelled() const {
    return {{"train", split.train}, {"in_distribution", split.in_distribution},
            {"out_of_distribution", split.out_of_distribution}};
  }
};

struct GenerateSummary {
  int substations = 0, lines = 0, injections = 0, days = 0;
  int train = 0, in_distribution = 0, out_of_distribution = 0;
  int congested_days = 0;  // reference daily max N-1 loading >= 1
};

inline GenerateSummary run_generate(const ExperimentConfig& c, const Logger& log = {}) {
  c.validate();
  namespace fs = std::filesystem;
  const auto dir = detail::out_dir(c);
  fs::create_directories(dir);
  std::optional<Grid> grid;
  DemandProfile profile;
  if (c.grid_path.empty()) {
    auto layout = desk_layout();
    profile = layout.profile;
    grid = calibrate_limits(std::move(layout.desc), layout.profile, c.synthetic);
  } else {
    grid = load_grid_file(c.grid_path);
  }
  profile.congestion_fraction = c.congestion_fraction;
  profile.surge_min = c.surge_min;
  profile.surge_max = c.surge_max;
  profile.noise = c.noise;
  profile.drift = c.drift;
  std::vector<DayScenario> days = c.scenario_path.empty()
                                      ? generate_synthetic_days(*grid, c.days, profile, c.scenario_seed)
                                      : load_day_scenarios_file(c.scenario_path, *grid);
  const auto split = split_dataset(days, c.split, c.split_seed);

  ScreeningCache cache(*grid);
  std::vector<const DayScenario*> train;
  for (int id : split.train)
    for (const auto& d : days)
      if (d.id == id) train.push_back(&d);
  std::vector<ExpertTopology> experts;
  if (c.auto_experts) {
    experts = select_expert_topologies(cache, train);
  } else {
    for (const auto& e : c.experts) experts.push_back({e.name, expert_topology(*grid, e)});
  }

  detail::write_json_file(dir / "grid.json", grid_to_json(*grid));
  {
    std::ostringstream os;
    write_day_scenarios(os, days);
    detail::write_text(dir / "scenarios.csv", os.str());
  }
  nlohmann::json sj;
  sj["seed"] = c.split_seed;
  sj["counts"] = {{"train", c.split.train},
                  {"in_distribution", c.split.in_distribution},
                  {"out_of_distribution", c.split.out_of_distribution}};
  sj["train"] = split.train;
  sj["in_distribution"] = split.in_distribution;
  sj["out_of_distribution"] = split.out_of_distribution;
  sj["experts"] = nlohmann::json::array();
  for (const auto& e : experts) {
    auto tj = topology_to_json(*grid, e.topology);
    tj["name"] = e.name;
    sj["experts"].push_back(tj);
  }
  detail::write_json_file(dir / "split.json", sj);
  detail::record_stage(c, "generate", {"grid.json", "scenarios.csv", "split.json"},
                       {{"scenarios", c.scenario_seed}, {"split", c.split_seed}});

  GenerateSummary s;
  s.substations = grid->substation_count();
  s.lines = grid->line_count();
  s.injections = grid->injection_count();
  s.days = static_cast<int>(days.size());
  s.train = static_cast<int>(split.train.size());
  s.in_distribution = static_cast<int>(split.in_distribution.size());
  s.out_of_distribution = static_cast<int>(split.out_of_distribution.size());
  const auto ref = TopologyConfig::reference(*grid);
  for (const auto& d : days) {
    double m = 0.0;
    for (int h = 1; h <= kHours; ++h) m = std::max(m, cache.screen(ref, d.at(h)).max_rho);
    s.congested_days += m >= 1.0 ? 1 : 0;
  }
  if (log) {
    std::ostringstream os;
    os << "grid: " << s.substations << " substations, " << s.lines << " lines, " << s.injections
       << " injections; days: " << s.days << " (" << s.congested_days << " congested in the reference topology); split "
       << s.train << "/" << s.in_distribution << "/" << s.out_of_distribution << "; experts:";
    for (const auto& e : experts) os << ' ' << '"' << e.name << '"';
    log(os.str());
  }
  return s;
}

inline Workspace load_workspace(const ExperimentConfig& c) {
  const auto dir = detail::out_dir(c);
  Workspace w{build_grid(detail::read_json_file(dir / "grid.json")), {}, {}, {}};
  w.days = load_day_scenarios_file((dir / "scenarios.csv").string(), w.grid);
  const auto sj = detail::read_json_file(dir / "split.json");
  try {
    w.split.train = sj.at("train").get<std::vector<int>>();
    w.split.in_distribution = sj.at("in_distribution").get<std::vector<int>>();
    w.split.out_of_distribution = sj.at("out_of_distribution").get<std::vector<int>>();
    for (const auto& e : sj.at("experts"))
      w.experts.push_back({e.at("name").get<std::string>(), topology_from_json(w.grid, e)});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed split manifest: ") + e.what());
  }
  return w;
}

inline TrainingResult run_train(const ExperimentConfig& c, const Logger& log = {}) {
  c.validate();
  if (c.agent == "greedy") throw ValidationError("the greedy agent has no training stage");
  const auto w = load_workspace(c);
  ScreeningCache cache(w.grid);
  const auto train = w.select(w.split.train);
  TrainingConfig tc = c.training;
  auto space = std::make_shared<const ActionSpace>(w.grid, tc.targets, tc.nearest);
  auto on_eval = [&](const CurvePoint& p) {
    if (log) {
      std::ostringstream os;
      os << "iteration " << p.iteration << ": greedy " << p.eval_reward << ", reference " << p.reference_reward
         << ", sampled " << p.batch_reward;
      log(os.str());
    }
  };
  TrainingResult r = c.agent == "ssa" ? train_ssa_policy(cache, train, tc, space, on_eval)
                                      : train_aza_mcts(cache, train, tc, space, on_eval);
  const auto dir = detail::out_dir(c);
  detail::write_json_file(dir / "policy.json", policy_to_json(r.policy));
  std::ostringstream curve;
  curve << "iteration,episodes,eval_reward,reference_reward,batch_reward\n";
  for (const auto& p : r.curve)
    curve << p.iteration << ',' << p.episodes << ',' << fmt(p.eval_reward) << ',' << fmt(p.reference_reward) << ','
          << fmt(p.batch_reward) << '\n';
  detail::write_text(dir / "training_curve.csv", curve.str());
  detail::record_stage(c, "train", {"policy.json", "training_curve.csv"}, {{"training", tc.seed}});
  return r;
}

/// Suggestions for every hour of one day from the configured agent.
inline std::vector<TopologyConfig> day_suggestions(const ExperimentConfig& c, const Policy* policy,
                                                   const ActionSpace& space, ScreeningCache& cache,
                                                   const DayScenario& day) {
  std::vector<TopologyConfig> out;
  if (c.agent == "greedy") {
    for (int h = 1; h <= kHours; ++h) out.push_back(greedy_suggest(space, cache, day, h, c.beam, c.ssa_weights).topology);
  } else {
    for (auto& s : policy_suggest_day(*policy, cache, day)) out.push_back(std::move(s.topology));
  }
  return out;
}

inline PlanDocument plan_day(const ExperimentConfig& c, const Policy* policy, const ActionSpace& space,
                             ScreeningCache& cache, const DayScenario& day) {
  const auto sugg = day_suggestions(c, policy, space, cache, day);
  const auto m = build_cost_matrix(cache, sugg, day);
  PlanDocument doc;
  doc.day = day.id;
  doc.agent = c.agent;
  doc.topologies = m.topologies;
  doc.suggestions.assign(m.row_topology.begin() + 1, m.row_topology.end());
  doc.plans = generate_plan_set(m, c.agent, day.id);
  return doc;
}

inline Policy load_policy_file(const Grid& grid, const std::filesystem::path& p) {
  return policy_from_json(grid, detail::read_json_file(p));
}

/// Plans the given days (all split days when empty) with `jobs` workers.
inline std::vector<double> run_plan(const ExperimentConfig& c, std::vector<int> day_ids = {}, const Logger& log = {}) {
  c.validate();
  namespace fs = std::filesystem;
  const auto w = load_workspace(c);
  const auto dir = detail::out_dir(c);
  std::optional<Policy> policy;
  std::shared_ptr<const ActionSpace> space;
  if (c.agent == "greedy") {
    space = std::make_shared<const ActionSpace>(w.grid, c.training.targets, c.training.nearest);
  } else {
    policy = load_policy_file(w.grid, dir / "policy.json");
    if (to_string(policy->kind) != c.agent)
      throw ValidationError("checkpoint holds a " + to_string(policy->kind) + " policy, config asks for " + c.agent);
    space = policy->space;
  }
  if (day_ids.empty())
    for (const auto& [label, ids] : w.labelled()) day_ids.insert(day_ids.end(), ids.begin(), ids.end());
  std::sort(day_ids.begin(), day_ids.end());
  day_ids.erase(std::unique(day_ids.begin(), day_ids.end()), day_ids.end());
  const auto days = w.select(day_ids);

  fs::create_directories(dir / "plans");
  ScreeningCache cache(w.grid);
  std::vector<double> seconds(days.size(), 0.0);
  std::vector<std::string> errors(days.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i; (i = next.fetch_add(1)) < days.size();) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const auto doc = plan_day(c, policy ? &*policy : nullptr, *space, cache, *days[i]);
        detail::write_json_file(dir / "plans" / detail::day_file(doc.day), plan_document_to_json(w.grid, doc));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
      seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const int jobs = c.jobs > 0 ? c.jobs : std::max(1U, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min<int>(jobs, static_cast<int>(days.size())); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < days.size(); ++i)
    if (!errors[i].empty()) throw Error("planning day " + std::to_string(days[i]->id) + " failed: " + errors[i]);

  std::ostringstream timing;
  timing << "day,seconds\n";
  std::vector<std::string> files;
  for (std::size_t i = 0; i < days.size(); ++i) {
    timing << days[i]->id << ',' << seconds[i] << '\n';
    files.push_back("plans/" + detail::day_file(days[i]->id));
    if (log) {
      std::ostringstream os;
      os << "day " << days[i]->id << " planned in " << seconds[i] << " s";
      log(os.str());
    }
  }
  detail::write_text(dir / "plan_timings.csv", timing.str());
  files.push_back("plan_timings.csv");
  detail::record_stage(c, "plan", files, nlohmann::json::object());
  return seconds;
}

struct EvaluationResult {
  std::vector<DayRecord> days;
  std::vector<SplitRecord> splits;
  std::vector<std::string> approaches;
};

inline EvaluationResult run_evaluate(const ExperimentConfig& c, const Logger& log = {}) {
  c.validate();
  const auto w = load_workspace(c);
  const auto dir = detail::out_dir(c);
  ScreeningCache cache(w.grid);
  EvaluationResult r;
  const std::string agent = detail::approach_label(c.agent);
  r.approaches = {agent, "Reference"};
  for (const auto& e : w.experts) r.approaches.push_back(e.name);
  r.approaches.push_back("Expert Set");
  std::vector<std::string> split_names;
  for (const auto& [label, ids] : w.labelled()) {
    split_names.push_back(label);
    for (int id : ids) {
      const auto& day = w.day(id);
      const auto path = dir / "plans" / detail::day_file(id);
      if (!std::filesystem::exists(path)) throw ValidationError("no plan document for day " + std::to_string(id));
      const auto doc = plan_document_from_json(w.grid, detail::read_json_file(path));
      if (doc.day != id) throw ValidationError("plan document " + path.string() + " is for another day");
      if (doc.plans.empty()) throw ValidationError("plan document for day " + std::to_string(id) + " has no plans");
      std::vector<ObjectivePoint> pts;
      for (const auto& p : doc.plans) {
        const double replayed = replay_plan(cache, doc.topologies, p, day);
        if (std::abs(replayed - p.max_rho) > 1e-9)
          throw Error("day " + std::to_string(id) + ": plan objective " + fmt(p.max_rho) + " does not replay (" +
                      fmt(replayed) + ")");
        pts.push_back(p.objectives());
      }
      r.days.push_back({label, id, agent, day_metrics(pts, c.hv_reference), static_cast<int>(pts.size())});
      for (const auto& [name, set] : expert_baseline_plans(cache, day, w.experts)) {
        std::vector<ObjectivePoint> bp;
        for (const auto& p : set.plans) bp.push_back(p.objectives());
        r.days.push_back({label, id, name, day_metrics(bp, c.hv_reference), static_cast<int>(bp.size())});
      }
    }
  }
  auto files = emit_report(dir / "report", r.days, split_names, r.approaches);
  for (auto& f : files) f = "report/" + f;
  r.splits = aggregate_by_split(r.days, split_names, r.approaches);
  detail::record_stage(c, "evaluate", files, nlohmann::json::object());
  if (log)
    for (const auto& s : r.splits) {
      std::ostringstream os;
      os << s.split << " / " << s.approach << ": median hypervolume " << s.hypervolume.median << ", solved "
         << s.solved_days << "/" << s.hypervolume.count << ", mean switching " << s.mean_n_switching;
      log(os.str());
    }
  return r;
}

}  // namespace gridplan
