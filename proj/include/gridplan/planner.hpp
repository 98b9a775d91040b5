#pragma once

// Day plans from per-timestamp topology suggestions: cost matrix, optimal
// switching schedules, expert baselines and plan documents.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridplan/environment.hpp"
#include "gridplan/grid.hpp"
#include "gridplan/grid_io.hpp"
#include "gridplan/pareto.hpp"
#include "gridplan/scenario.hpp"

namespace gridplan {

/// cost[i][j-1]: max_rho_n1 of the topology of row i at hour j (j >= i).
/// Row 0 is the reference topology; row i >= 1 the suggestion at hour i.
struct CostMatrix {
  int hours = 0;
  std::vector<std::vector<double>> cost;
  std::vector<int> row_topology;          // distinct-topology id per row
  std::vector<TopologyConfig> topologies;  // id 0 = reference (may be empty for synthetic matrices)

  double at(int row, int hour) const { return cost.at(row).at(hour - 1); }

  /// Matrix without topologies; every row counts as a distinct topology.
  static CostMatrix from_values(std::vector<std::vector<double>> values) {
    CostMatrix m;
    if (values.size() < 2) throw ValidationError("cost matrix needs a reference row and at least one hour");
    m.hours = static_cast<int>(values.size()) - 1;
    for (const auto& r : values)
      if (static_cast<int>(r.size()) != m.hours) throw ValidationError("cost matrix rows must have one entry per hour");
    m.cost = std::move(values);
    for (int i = 0; i <= m.hours; ++i) m.row_topology.push_back(i);
    return m;
  }
};

/// Screens every distinct suggested topology at each hour it can be active.
/// Islanded base topologies get the sentinel loading.
inline CostMatrix build_cost_matrix(ScreeningCache& cache, std::span<const TopologyConfig> suggestions,
                                    const DayScenario& day) {
  if (suggestions.size() != static_cast<std::size_t>(kHours))
    throw ValidationError("one suggestion per timestamp is required");
  const Grid& grid = cache.grid();
  CostMatrix m;
  m.hours = kHours;
  m.topologies.push_back(TopologyConfig::reference(grid));
  m.row_topology.push_back(0);
  for (const auto& s : suggestions) {
    detail::check_same_grid(grid, s);
    auto it = std::find(m.topologies.begin(), m.topologies.end(), s);
    if (it == m.topologies.end()) {
      m.row_topology.push_back(static_cast<int>(m.topologies.size()));
      m.topologies.push_back(s);
    } else {
      m.row_topology.push_back(static_cast<int>(it - m.topologies.begin()));
    }
  }
  // First row using each topology bounds the hours it is needed for.
  std::vector<int> first_row(m.topologies.size(), kHours + 1);
  for (int i = kHours; i >= 0; --i) first_row[m.row_topology[i]] = i;
  std::vector<std::vector<double>> per_topology(m.topologies.size(),
                                                std::vector<double>(kHours, std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t t = 0; t < m.topologies.size(); ++t) {
    std::shared_ptr<const ContingencyScreener> screener;
    try {
      screener = cache.get(m.topologies[t]);
    } catch (const Error&) {
    }
    for (int j = std::max(first_row[t], 1); j <= kHours; ++j) {
      double rho = kIslandRho;
      if (screener) {
        try {
          rho = screener->screen(m.topologies[t], day.at(j)).max_rho;
        } catch (const Error&) {
        }
      }
      per_topology[t][j - 1] = rho;
    }
  }
  for (int i = 0; i <= kHours; ++i) m.cost.push_back(per_topology[m.row_topology[i]]);
  return m;
}

struct PlanCandidate {
  std::vector<int> switch_times;     // hours where the active topology changes
  std::vector<int> hourly_row;       // active cost-matrix row per hour
  std::vector<int> hourly_topology;  // active topology id per hour
  double max_rho = 0.0;
  int n_switching = 0;
  double cost_sum = 0.0;
  std::string agent;
  int day = -1;

  ObjectivePoint objectives() const { return {max_rho, n_switching}; }
};

namespace detail {

inline bool sums_tie(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

/// Fills switches, topology ids and objectives from the per-hour rows.
inline PlanCandidate plan_from_rows(const CostMatrix& m, std::vector<int> rows) {
  PlanCandidate p;
  int prev = m.row_topology[0];
  for (int j = 1; j <= m.hours; ++j) {
    const int r = rows[j - 1];
    const int t = m.row_topology[r];
    if (t != prev) p.switch_times.push_back(j);
    prev = t;
    p.hourly_topology.push_back(t);
    const double c = m.at(r, j);
    p.max_rho = j == 1 ? c : std::max(p.max_rho, c);
    p.cost_sum += c;
  }
  p.n_switching = static_cast<int>(p.switch_times.size());
  p.hourly_row = std::move(rows);
  return p;
}

/// Plan ordering: loading, then switches, then cost sum, then earliest switches.
inline bool plan_better(const PlanCandidate& a, const PlanCandidate& b) {
  if (a.max_rho != b.max_rho) return a.max_rho < b.max_rho;
  if (a.n_switching != b.n_switching) return a.n_switching < b.n_switching;
  if (!sums_tie(a.cost_sum, b.cost_sum)) return a.cost_sum < b.cost_sum;
  return a.switch_times < b.switch_times;
}

}  // namespace detail

inline PlanCandidate reference_plan(const CostMatrix& m) {
  return detail::plan_from_rows(m, std::vector<int>(m.hours, 0));
}

/// Optimal plan using at most `max_switches` switches: minimal running
/// maximum of hourly costs, then fewest switches, then smallest cost sum,
/// then earliest switch times.
inline PlanCandidate best_plan_for_switch_count(const CostMatrix& m, int max_switches) {
  const int T = m.hours;
  if (max_switches < 0 || max_switches > T) throw ValidationError("switch count out of range");
  const int R = T + 1, K = max_switches + 1;
  auto idx = [&](int j, int a, int k) { return (static_cast<std::size_t>(j) * R + a) * K + k; };
  const double inf = std::numeric_limits<double>::infinity();

  // Minimal achievable running maximum from hour j with active row a.
  std::vector<double> V(static_cast<std::size_t>(T + 2) * R * K, -inf);
  for (int j = T; j >= 1; --j)
    for (int a = 0; a < j; ++a)
      for (int k = 0; k < K; ++k) {
        double best = std::max(m.at(a, j), V[idx(j + 1, a, k)]);
        if (k > 0 && m.row_topology[j] != m.row_topology[a])
          best = std::min(best, std::max(m.at(j, j), V[idx(j + 1, j, k - 1)]));
        V[idx(j, a, k)] = best;
      }
  const double target = V[idx(1, 0, max_switches)];

  // Among plans staying within `target`: fewest switches, then smallest sum.
  struct Cell {
    bool ok = false;
    int count = 0;
    double sum = 0.0;
    bool switch_now = false;
  };
  std::vector<Cell> W(static_cast<std::size_t>(T + 2) * R * K);
  for (int a = 0; a < R; ++a)
    for (int k = 0; k < K; ++k) W[idx(T + 1, a, k)] = {true, 0, 0.0, false};
  for (int j = T; j >= 1; --j)
    for (int a = 0; a < j; ++a)
      for (int k = 0; k < K; ++k) {
        Cell best;
        const Cell& stay = W[idx(j + 1, a, k)];
        if (stay.ok && m.at(a, j) <= target) best = {true, stay.count, stay.sum + m.at(a, j), false};
        if (k > 0 && m.row_topology[j] != m.row_topology[a] && m.at(j, j) <= target) {
          const Cell& sw = W[idx(j + 1, j, k - 1)];
          if (sw.ok) {
            const Cell cand{true, sw.count + 1, sw.sum + m.at(j, j), true};
            const bool take = !best.ok || cand.count < best.count ||
                              (cand.count == best.count &&
                               (detail::sums_tie(cand.sum, best.sum) || cand.sum < best.sum));
            if (take) best = cand;
          }
        }
        W[idx(j, a, k)] = best;
      }

  std::vector<int> rows;
  int a = 0, k = max_switches;
  for (int j = 1; j <= T; ++j) {
    if (W[idx(j, a, k)].switch_now) {
      a = j;
      --k;
    }
    rows.push_back(a);
  }
  return detail::plan_from_rows(m, std::move(rows));
}

/// Literal enumeration of every set of at most `max_switches` switch hours.
inline PlanCandidate brute_force_best_plan(const CostMatrix& m, int max_switches,
                                           std::uint64_t budget = 5'000'000, std::uint64_t* evaluated = nullptr) {
  const int T = m.hours;
  if (max_switches < 0 || max_switches > T) throw ValidationError("switch count out of range");
  double combos = 0.0, c = 1.0;
  for (int k = 0; k <= max_switches; ++k) {
    combos += c;
    c = c * (T - k) / (k + 1);
  }
  if (combos > static_cast<double>(budget)) throw ValidationError("plan enumeration exceeds budget");
  std::optional<PlanCandidate> best;
  std::uint64_t count = 0;
  std::vector<int> chosen;
  auto consider = [&]() {
    ++count;
    std::vector<int> rows;
    int a = 0;
    std::size_t next = 0;
    for (int j = 1; j <= T; ++j) {
      if (next < chosen.size() && chosen[next] == j) {
        a = j;
        ++next;
      }
      rows.push_back(a);
    }
    auto p = detail::plan_from_rows(m, std::move(rows));
    if (!best || detail::plan_better(p, *best)) best = std::move(p);
  };
  auto recurse = [&](auto&& self, int start, int remaining) -> void {
    if (remaining == 0) {
      consider();
      return;
    }
    for (int j = start; j <= T; ++j) {
      chosen.push_back(j);
      self(self, j + 1, remaining - 1);
      chosen.pop_back();
    }
  };
  for (int k = 0; k <= max_switches; ++k) recurse(recurse, 1, k);
  if (evaluated) *evaluated = count;
  return *best;
}

/// Reference plan plus the optimal plan for every switch budget, with
/// dominated plans removed, sorted by switch count.
inline std::vector<PlanCandidate> generate_plan_set(const CostMatrix& m, const std::string& agent = "", int day = -1) {
  std::vector<PlanCandidate> all{reference_plan(m)};
  for (int n = 1; n <= m.hours; ++n) all.push_back(best_plan_for_switch_count(m, n));
  auto kept = non_dominated(all, [](const PlanCandidate& p) { return p.objectives(); });
  for (auto& p : kept) {
    p.agent = agent;
    p.day = day;
  }
  return kept;
}

inline std::vector<PlanCandidate> generate_plan_set(ScreeningCache& cache, std::span<const TopologyConfig> suggestions,
                                                    const DayScenario& day, const std::string& agent = "") {
  return generate_plan_set(build_cost_matrix(cache, suggestions, day), agent, day.id);
}

struct ExpertTopology {
  std::string name;
  TopologyConfig topology;
};

/// A plan set together with the topologies its hourly ids refer to.
struct PlanSet {
  std::vector<TopologyConfig> topologies;
  std::vector<PlanCandidate> plans;
};

/// "Reference", one entry per expert (held all day from hour 1) and
/// "Expert Set" (their non-dominated union).
inline std::map<std::string, PlanSet> expert_baseline_plans(ScreeningCache& cache, const DayScenario& day,
                                                            const std::vector<ExpertTopology>& experts) {
  const Grid& grid = cache.grid();
  const TopologyConfig ref = TopologyConfig::reference(grid);
  auto hourly = [&](const TopologyConfig& t) {
    std::vector<double> c(kHours, kIslandRho);
    std::shared_ptr<const ContingencyScreener> screener;
    try {
      screener = cache.get(t);
    } catch (const Error&) {
      return c;
    }
    for (int j = 1; j <= kHours; ++j) c[j - 1] = screener->screen(t, day.at(j)).max_rho;
    return c;
  };
  auto held = [&](const std::vector<double>& c, bool switched, int topo_id, const std::string& name) {
    PlanCandidate p;
    p.agent = name;
    p.day = day.id;
    for (int j = 1; j <= kHours; ++j) {
      p.max_rho = j == 1 ? c[0] : std::max(p.max_rho, c[j - 1]);
      p.cost_sum += c[j - 1];
      p.hourly_row.push_back(switched ? 1 : 0);
      p.hourly_topology.push_back(topo_id);
    }
    if (switched) p.switch_times = {1};
    p.n_switching = static_cast<int>(p.switch_times.size());
    return p;
  };
  std::map<std::string, PlanSet> out;
  const auto ref_plan = held(hourly(ref), false, 0, "Reference");
  out["Reference"] = {{ref}, {ref_plan}};
  PlanSet set{{ref}, {}};
  std::vector<PlanCandidate> pool{ref_plan};
  for (const auto& e : experts) {
    detail::check_same_grid(grid, e.topology);
    if (topological_depth(grid, e.topology) > kMaxDepth)
      throw ValidationError("expert topology '" + e.name + "' is deeper than " + std::to_string(kMaxDepth));
    const auto c = hourly(e.topology);
    const bool same = e.topology == ref;
    out[e.name] = same ? PlanSet{{ref}, {held(c, false, 0, e.name)}}
                       : PlanSet{{ref, e.topology}, {held(c, true, 1, e.name)}};
    int id = 0;
    if (!same) {
      auto it = std::find(set.topologies.begin(), set.topologies.end(), e.topology);
      id = static_cast<int>(it - set.topologies.begin());
      if (it == set.topologies.end()) set.topologies.push_back(e.topology);
    }
    pool.push_back(held(c, !same, id, e.name));
  }
  set.plans = non_dominated(pool, [](const PlanCandidate& p) { return p.objectives(); });
  for (auto& p : set.plans) p.agent = "Expert Set";
  out["Expert Set"] = std::move(set);
  return out;
}

/// Recomputes a plan's max_rho_n1 by screening its hourly topologies.
inline double replay_plan(ScreeningCache& cache, const std::vector<TopologyConfig>& topologies,
                          const PlanCandidate& plan, const DayScenario& day) {
  double worst = 0.0;
  for (int j = 1; j <= kHours; ++j) {
    const auto& t = topologies.at(plan.hourly_topology.at(j - 1));
    double rho = kIslandRho;
    try {
      rho = cache.screen(t, day.at(j)).max_rho;
    } catch (const Error&) {
    }
    worst = j == 1 ? rho : std::max(worst, rho);
  }
  return worst;
}

// Plan document (JSON):
//   {"schema_version": 1, "day": 7, "agent": "ssa",
//    "topologies": [{"id": 0, "branch": "AB..", "injection": "AB..", "offline": []}, ...],
//    "suggestions": [topology id per hour],
//    "plans": [{"switch_times": [...], "hourly_topology": [24 ids],
//               "max_rho_n1": 0.97, "n_switching": 2}, ...]}
inline constexpr int kPlanSchemaVersion = 1;

struct PlanDocument {
  int day = -1;
  std::string agent;
  std::vector<TopologyConfig> topologies;
  std::vector<int> suggestions;
  std::vector<PlanCandidate> plans;
};

inline nlohmann::json plan_document_to_json(const Grid& grid, const PlanDocument& doc) {
  using nlohmann::json;
  json j;
  j["schema_version"] = kPlanSchemaVersion;
  j["day"] = doc.day;
  j["agent"] = doc.agent;
  j["topologies"] = json::array();
  for (std::size_t t = 0; t < doc.topologies.size(); ++t) {
    json tj = topology_to_json(grid, doc.topologies[t]);
    tj["id"] = t;
    j["topologies"].push_back(tj);
  }
  j["suggestions"] = doc.suggestions;
  j["plans"] = json::array();
  for (const auto& p : doc.plans)
    j["plans"].push_back({{"switch_times", p.switch_times},
                          {"hourly_topology", p.hourly_topology},
                          {"max_rho_n1", p.max_rho},
                          {"n_switching", p.n_switching}});
  return j;
}

inline PlanDocument plan_document_from_json(const Grid& grid, const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kPlanSchemaVersion) throw ValidationError("unsupported plan schema version");
    PlanDocument doc;
    doc.day = j.at("day").get<int>();
    doc.agent = j.at("agent").get<std::string>();
    for (const auto& tj : j.at("topologies")) doc.topologies.push_back(topology_from_json(grid, tj));
    if (doc.topologies.empty()) throw ValidationError("plan document lists no topologies");
    doc.suggestions = j.value("suggestions", std::vector<int>{});
    for (const auto& pj : j.at("plans")) {
      PlanCandidate p;
      p.switch_times = pj.at("switch_times").get<std::vector<int>>();
      p.hourly_topology = pj.at("hourly_topology").get<std::vector<int>>();
      p.max_rho = pj.at("max_rho_n1").get<double>();
      p.n_switching = pj.at("n_switching").get<int>();
      p.agent = doc.agent;
      p.day = doc.day;
      if (static_cast<int>(p.hourly_topology.size()) != kHours)
        throw ValidationError("plan must list one topology per hour");
      for (int t : p.hourly_topology)
        if (t < 0 || t >= static_cast<int>(doc.topologies.size())) throw ValidationError("plan references unknown topology");
      doc.plans.push_back(std::move(p));
    }
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed plan document: ") + e.what());
  }
}

}  // namespace gridplan
