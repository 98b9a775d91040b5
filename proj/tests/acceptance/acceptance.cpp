// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "gridplan/experiment.hpp"
#include "gridplan/synthetic.hpp"
#include "support.hpp"

using namespace gridplan;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail << std::endl;
  if (!o.pass) ++failures;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

Outcome power_flow_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  double worst_balance = 0.0, worst_ptdf = 0.0, worst_lodf = 0.0;
  int outages = 0, bridge_mismatch = 0, min_buses = 1 << 30, max_buses = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n_sub = 5 + (195 * trial) / 49;
    const Grid g = testsupport::random_grid(rng, n_sub);
    const auto p = testsupport::random_injections(g, rng);
    auto t = testsupport::random_topology(g, rng, std::max(1, n_sub / 10), 0);
    if (!testsupport::DenseModel(g, t, p).connected()) t = TopologyConfig::reference(g);
    const testsupport::DenseModel dense(g, t, p);
    const auto direct = dense.flows();
    const double scale = std::max(1.0, testsupport::max_abs(direct));

    const auto sol = solve_dc(g, t, p);
    min_buses = std::min(min_buses, sol.network.node_count);
    max_buses = std::max(max_buses, sol.network.node_count);
    std::vector<double> net = sol.node_injection;
    for (int l = 0; l < g.line_count(); ++l) {
      if (!sol.network.online[l]) continue;
      net[sol.network.from_node[l]] -= sol.flows[l];
      net[sol.network.to_node[l]] += sol.flows[l];
    }
    for (double r : net) worst_balance = std::max(worst_balance, std::abs(r));

    const auto f = compute_lodf(compute_ptdf(g, t));
    std::vector<double> predicted(g.line_count(), 0.0);
    for (int l = 0; l < g.line_count(); ++l) {
      for (int n = 0; n < sol.network.node_count; ++n) predicted[l] += f.ptdf(l, n) * sol.node_injection[n];
      worst_ptdf = std::max(worst_ptdf, std::abs(predicted[l] - direct[l]) / scale);
    }

    for (int k = 0; k < g.line_count(); ++k) {
      if (!t.line_online(k)) continue;
      if (f.bridge[k] != !dense.connected(k)) ++bridge_mismatch;
      if (f.bridge[k]) continue;
      auto out = t;
      out.set_line_online(k, false);
      const auto post = solve_dc(g, out, p).flows;
      const double post_scale = std::max(1.0, testsupport::max_abs(post));
      for (int l = 0; l < g.line_count(); ++l) {
        if (l == k || !t.line_online(l)) continue;
        const double lodf_flow = sol.flows[l] + f.lodf(l, k) * sol.flows[k];
        worst_lodf = std::max(worst_lodf, std::abs(lodf_flow - post[l]) / post_scale);
      }
      ++outages;
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst_balance <= 1e-9 && worst_ptdf <= 1e-8 && worst_lodf <= 1e-6 && bridge_mismatch == 0 && secs < 60.0;
  o.detail = "50 grids with " + std::to_string(min_buses) + "-" + std::to_string(max_buses) +
             " buses; max balance residual " + num(worst_balance) + " (<= 1e-9), PTDF rel. error " + num(worst_ptdf) +
             " (<= 1e-8), LODF rel. error " + num(worst_lodf) + " over " + std::to_string(outages) +
             " outages (<= 1e-6), bridge mismatches " + std::to_string(bridge_mismatch) + ", " + num(secs) +
             " s (< 60)";
  return o;
}

Outcome planner_optimality() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.2, 1.8);
  int matrices = 0, instances = 0, mismatches = 0;
  for (int trial = 0; trial < 240; ++trial) {
    const int T = 1 + trial % 8;
    std::vector<std::vector<double>> v(T + 1, std::vector<double>(T));
    const bool coarse = trial % 3 == 0;
    for (auto& row : v)
      for (double& x : row) x = coarse ? 0.25 * static_cast<double>(1 + rng() % 6) : u(rng);
    const auto m = CostMatrix::from_values(std::move(v));
    ++matrices;
    for (int n = 0; n <= std::min(4, T); ++n) {
      const auto dp = best_plan_for_switch_count(m, n);
      const auto bf = brute_force_best_plan(m, n);
      ++instances;
      if (dp.max_rho != bf.max_rho || dp.n_switching != bf.n_switching || dp.hourly_row != bf.hourly_row) ++mismatches;
    }
  }

  const Grid grid = make_desk_grid();
  const auto days = generate_synthetic_days(grid, 4, desk_profile(), 91);
  const auto targets = generate_target_topologies(grid);
  ScreeningCache cache(grid);
  double worst_replay = 0.0, worst_dense = 0.0;
  int plans = 0;
  for (const auto& day : days) {
    std::vector<TopologyConfig> sugg;
    for (int h = 0; h < kHours; ++h)
      sugg.push_back(rng() % 4 == 0 ? TopologyConfig::reference(grid) : targets[rng() % targets.size()].config);
    const auto m = build_cost_matrix(cache, sugg, day);
    for (const auto& p : generate_plan_set(m)) {
      worst_replay = std::max(worst_replay, std::abs(replay_plan(cache, m.topologies, p, day) - p.max_rho));
      double dense = 0.0;
      for (int j = 1; j <= kHours; ++j)
        dense = std::max(dense, testsupport::exhaustive_n1(grid, m.topologies[p.hourly_topology[j - 1]], day.at(j)));
      worst_dense = std::max(worst_dense, std::abs(dense - p.max_rho));
      ++plans;
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = mismatches == 0 && matrices >= 200 && worst_replay <= 1e-9 && worst_dense <= 1e-9 && secs < 30.0;
  o.detail = std::to_string(mismatches) + " DP/brute-force mismatches over " + std::to_string(instances) +
             " instances on " + std::to_string(matrices) + " matrices (T <= 8, N_s <= 4); replay error " +
             num(worst_replay) + ", dense re-solve error " + num(worst_dense) + " over " + std::to_string(plans) +
             " plans (<= 1e-9), " + num(secs) + " s (< 30)";
  return o;
}

// Unit-strip integration of the dominated area.
double strip_hypervolume(const std::vector<ObjectivePoint>& pts, ObjectivePoint ref) {
  double area = 0.0;
  for (int y = 0; y < ref.n_switching; ++y) {
    double best = ref.max_rho;
    for (const auto& p : pts)
      if (p.n_switching <= y) best = std::min(best, std::max(p.max_rho, 0.0));
    area += ref.max_rho - best;
  }
  return area;
}

Outcome pareto_exactness() {
  std::mt19937_64 rng(5150);
  int filter_bad = 0, hv_bad = 0;
  const ObjectivePoint dyadic_ref{3.125, 25};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<ObjectivePoint> pts;
    const int n = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i)
      pts.push_back({static_cast<double>(rng() % 256) / 64.0, static_cast<int>(rng() % 30)});
    const auto out = non_dominated_filter(pts);
    bool ok = non_dominated_filter(out) == out;
    for (std::size_t i = 0; i < out.size(); ++i)
      for (std::size_t j = 0; j < out.size(); ++j) ok = ok && (i == j || !weakly_dominates(out[i], out[j]));
    for (const auto& p : pts)
      ok = ok && std::any_of(out.begin(), out.end(), [&](const ObjectivePoint& q) { return weakly_dominates(q, p); });
    filter_bad += !ok;
    hv_bad += hypervolume2d(pts, dyadic_ref) != strip_hypervolume(pts, dyadic_ref);
  }
  const std::vector<ObjectivePoint> worked{{1.0, 5}, {2.0, 2}};
  const double hv = hypervolume2d(worked, {3.1, 25});
  Outcome o;
  o.pass = filter_bad == 0 && hv_bad == 0 && std::abs(hv - 45.3) <= 1e-12;
  o.detail = std::to_string(filter_bad) + "/1000 filter violations, " + std::to_string(hv_bad) +
             "/1000 hypervolume mismatches against the strip oracle (exact), worked example " + num(hv) +
             " (expected 45.3)";
  return o;
}

Outcome reward_fidelity() {
  struct SsaCase {
    double rho;
    int window;
    double aggregate;
    double expected;
  };
  const SsaCase ssa[] = {{0.8, 3, 0.9, 2.145},     {3.5, 0, 0.0, -0.15},   {0.0, 0, 0.0, 0.3},
                         {1.0, 23, 0.99, 16.1015}, {0.5, 1, 0.5, 0.85},    {2.0, 0, 0.0, 0.0},
                         {4.0, 2, 0.25, 1.2125},   {0.25, 10, 0.75, 7.15}, {1.5, 5, 0.6, 3.485},
                         {0.9, 12, 0.95, 8.4225}};
  struct AzaCase {
    bool changed;
    double rho;
    double expected;
  };
  const AzaCase aza[] = {{false, 0.5, 0.525}, {true, 1.0, 0.0},   {false, 0.0, 1.0},   {true, 0.0, 0.95},
                         {false, 3.0, -1.85}, {true, 10.0, -1.9}, {false, 1.2, -0.14}, {true, 0.75, 0.2375},
                         {false, 0.9, 0.145}, {true, 2.5, -1.425}};
  int bad = 0, cases = 0;
  double worst = 0.0;
  for (const auto& c : ssa) {
    EnvState s;
    s.max_rho = c.rho;
    s.terminal = true;
    StableWindow w;
    for (int j = 0; j < c.window; ++j) w.hours.push_back(2 + j);
    w.aggregate = c.aggregate;
    const double got = ssa_terminal_reward(s, w, {0.15, 0.7, 0.15});
    worst = std::max(worst, std::abs(got - c.expected));
    bad += std::abs(got - c.expected) > 1e-12;
    ++cases;
  }
  const Grid g = testsupport::triangle();
  const auto ref = TopologyConfig::reference(g);
  const auto other = apply_unitary_action(g, ref, disable_line(0));
  for (const auto& c : aza) {
    ContingencyReport r;
    r.max_rho = c.rho;
    const double got = aza_step_reward(ref, c.changed ? other : ref, r, {0.95, 0.05, 0.0});
    worst = std::max(worst, std::abs(got - c.expected));
    bad += std::abs(got - c.expected) > 1e-12;
    ++cases;
  }
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> x(-1.0, 12.0);
  int monotone_bad = 0;
  for (int i = 0; i < 10000; ++i) {
    double a = x(rng), b = x(rng);
    if (a > b) std::swap(a, b);
    monotone_bad += loading_utility(a) < loading_utility(b);
  }
  Outcome o;
  o.pass = bad == 0 && cases == 20 && monotone_bad == 0;
  o.detail = std::to_string(cases - bad) + "/" + std::to_string(cases) + " hand-computed rewards within 1e-12 (max error " +
             num(worst) + "), " + std::to_string(monotone_bad) + "/10000 monotonicity violations";
  return o;
}

struct PipelineRun {
  EvaluationResult eval;
  std::vector<double> plan_seconds;
  double seconds = 0.0;
};

PipelineRun run_pipeline(const fs::path& out, int jobs) {
  auto c = load_experiment_config(std::string(GRIDPLAN_SOURCE_DIR) + "/configs/desk14.json");
  c.out = out.string();
  c.jobs = jobs;
  fs::remove_all(out);
  const Logger quiet;
  PipelineRun r;
  const auto t0 = Clock::now();
  run_generate(c, quiet);
  run_train(c, quiet);
  r.plan_seconds = run_plan(c, {}, quiet);
  r.eval = run_evaluate(c, quiet);
  r.seconds = seconds_since(t0);
  return r;
}

const SplitRecord* row(const EvaluationResult& e, const std::string& split, const std::string& approach) {
  for (const auto& s : e.splits)
    if (s.split == split && s.approach == approach) return &s;
  return nullptr;
}

Outcome end_to_end(const PipelineRun& run) {
  const std::string agent = "SSA + SSP";
  Outcome o;
  std::ostringstream os;
  double switching = 0.0;
  int split_count = 0;
  for (const char* split : {"train", "in_distribution", "out_of_distribution"}) {
    const auto* a = row(run.eval, split, agent);
    const auto* e = row(run.eval, split, "Expert Set");
    if (!a || !e) {
      o.pass = false;
      os << split << ": missing rows; ";
      continue;
    }
    const bool hv_needed = std::string(split) != "out_of_distribution";
    const bool hv_ok = a->hypervolume.median >= e->hypervolume.median;
    const bool solved_ok = a->solved_rate >= e->solved_rate;
    if ((hv_needed && !hv_ok) || !solved_ok) o.pass = false;
    os << split << ": median HV " << num(a->hypervolume.median) << " vs expert set " << num(e->hypervolume.median)
       << (hv_needed ? (hv_ok ? " ok" : " LOW") : " (not required)") << ", solved " << a->solved_days << "/"
       << a->hypervolume.count << " vs " << e->solved_days << "/" << e->hypervolume.count << (solved_ok ? " ok" : " LOW")
       << "; ";
    switching += a->mean_n_switching * a->hypervolume.count;
    split_count += a->hypervolume.count;
    if (std::string(split) == "out_of_distribution") {
      const bool ood_ok = a->solved_rate >= 0.75;
      if (!ood_ok) o.pass = false;
      os << "OOD solved rate " << num(a->solved_rate) << (ood_ok ? " (>= 0.75)" : " (< 0.75)") << "; ";
    }
  }
  const double mean_switching = split_count ? switching / split_count : 0.0;
  if (!(mean_switching <= 4.0)) o.pass = false;
  if (!(run.seconds < 900.0)) o.pass = false;
  os << "mean N switching of best plans " << num(mean_switching) << " (<= 4); pipeline " << num(run.seconds)
     << " s (< 900)";
  o.detail = os.str();
  return o;
}

Outcome planning_latency(const PipelineRun& single) {
  double worst = 0.0;
  for (double s : single.plan_seconds) worst = std::max(worst, s);
  Outcome o;
  o.pass = !single.plan_seconds.empty() && worst <= 60.0;
  o.detail = "slowest of " + std::to_string(single.plan_seconds.size()) + " days planned single-worker: " + num(worst) +
             " s (<= 60)";
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a / "plans")) files.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::directory_iterator(a / "report"))
    if (e.path().extension() == ".csv") files.push_back(fs::relative(e.path(), a));
  files.push_back("policy.json");
  std::sort(files.begin(), files.end());
  int differ = 0;
  std::string first;
  for (const auto& f : files)
    if (!fs::exists(b / f) || slurp(a / f) != slurp(b / f)) {
      if (!differ) first = f.string();
      ++differ;
    }
  Outcome o;
  o.pass = differ == 0 && files.size() > 3;
  o.detail = std::to_string(files.size() - differ) + "/" + std::to_string(files.size()) +
             " plan documents, report tables and checkpoint byte-identical across reruns" +
             (differ ? " (first difference: " + first + ")" : "");
  return o;
}

Outcome guarded(const std::function<Outcome()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main() {
  report(1, "power-flow correctness", guarded(power_flow_correctness));
  report(2, "planner optimality", guarded(planner_optimality));
  report(3, "Pareto and hypervolume exactness", guarded(pareto_exactness));
  report(4, "reward fidelity", guarded(reward_fidelity));

  const fs::path root = fs::current_path() / "acceptance_runs";
  PipelineRun parallel, single;
  std::string pipeline_error;
  try {
    parallel = run_pipeline(root / "parallel", 0);
    single = run_pipeline(root / "single", 1);
  } catch (const std::exception& e) {
    pipeline_error = e.what();
  }
  if (pipeline_error.empty()) {
    report(5, "end-to-end benchmark", guarded([&] { return end_to_end(parallel); }));
    report(6, "planning latency", guarded([&] { return planning_latency(single); }));
    report(7, "determinism", guarded([&] { return determinism(root / "parallel", root / "single"); }));
  } else {
    for (int id : {5, 6, 7}) report(id, "pipeline", {false, "pipeline failed: " + pipeline_error});
  }
  std::cout << (failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED") << " (" << 7 - failures << "/7)" << std::endl;
  return failures ? 1 : 0;
}
