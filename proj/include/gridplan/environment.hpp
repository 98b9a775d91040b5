#pragma once

// Episodic topology environment: an episode starts from the reference
// topology at one timestamp and applies at most three unitary actions.

#include <algorithm>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gridplan/error.hpp"
#include "gridplan/grid.hpp"
#include "gridplan/powerflow.hpp"
#include "gridplan/scenario.hpp"
#include "gridplan/targets.hpp"

namespace gridplan {

/// Memoised N-1 screeners keyed on branch topology (line-end buses and line
/// status). Injection placement does not affect the key. Thread-safe.
class ScreeningCache {
 public:
  explicit ScreeningCache(const Grid& grid, std::size_t max_entries = 200000)
      : grid_(&grid), max_entries_(max_entries) {}

  const Grid& grid() const { return *grid_; }

  std::shared_ptr<const ContingencyScreener> get(const TopologyConfig& topo) {
    std::string key = branch_key(topo);
    {
      std::lock_guard lock(mu_);
      if (auto it = map_.find(key); it != map_.end()) return it->second;
    }
    auto screener = std::make_shared<const ContingencyScreener>(*grid_, topo);
    std::lock_guard lock(mu_);
    if (map_.size() >= max_entries_) map_.clear();
    return map_.emplace(std::move(key), std::move(screener)).first->second;
  }

  ContingencyReport screen(const TopologyConfig& topo, std::span<const double> injections) {
    return get(topo)->screen(topo, injections);
  }

 private:
  static std::string branch_key(const TopologyConfig& topo) {
    std::string key;
    key.reserve(topo.branch_assignment().size() * 2);
    for (Bus b : topo.branch_assignment()) key.push_back(b == Bus::A ? 'A' : 'B');
    key.push_back('|');
    for (std::size_t l = 0; l < topo.branch_assignment().size() / 2; ++l)
      key.push_back(topo.line_online(static_cast<int>(l)) ? '1' : '0');
    return key;
  }

  const Grid* grid_;
  std::size_t max_entries_;
  std::mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<const ContingencyScreener>> map_;
};

struct RewardWeights {
  double w1 = 0.15;
  double w2 = 0.7;
  double w3 = 0.15;

  static RewardWeights ssa() { return {0.15, 0.7, 0.15}; }
  static RewardWeights aza() { return {0.95, 0.05, 0.0}; }
};

/// Monotonically decreasing utility of a loading, bounded to [-2, 1].
inline double loading_utility(double rho) { return std::clamp(1.0 - rho, -2.0, 1.0); }

struct StableWindow {
  std::vector<int> hours;  // consecutive timestamps after the start hour
  double aggregate = 0.0;  // max of max_rho over `hours`, 0 when empty
  int size() const { return static_cast<int>(hours.size()); }
};

/// Longest run of timestamps i+1, i+2, ... for which `topo` keeps
/// max_rho_n1 below 1.
inline StableWindow stable_window(ScreeningCache& cache, const TopologyConfig& topo, const DayScenario& day,
                                  int hour) {
  StableWindow w;
  std::shared_ptr<const ContingencyScreener> screener;
  try {
    screener = cache.get(topo);
  } catch (const IslandingError&) {
    return w;
  }
  for (int j = hour + 1; j <= kHours; ++j) {
    const double rho = screener->screen(topo, day.at(j)).max_rho;
    if (!(rho < 1.0)) break;
    w.hours.push_back(j);
    w.aggregate = std::max(w.aggregate, rho);
  }
  return w;
}

inline StableWindow stable_window(const Grid& grid, const TopologyConfig& topo, const DayScenario& day, int hour) {
  ScreeningCache cache(grid);
  return stable_window(cache, topo, day, hour);
}

struct EnvState {
  TopologyConfig topo;
  std::vector<double> loadings;  // base-case rho per line
  double max_rho = 0.0;          // N-1 worst loading at `hour`
  int hour = 1;
  int actions_taken = 0;
  bool terminal = false;
  std::vector<UnitaryAction> trace;
};

inline double ssa_terminal_reward(const EnvState& final_state, const StableWindow& window, const RewardWeights& w) {
  if (!final_state.terminal) throw ValidationError("terminal reward requested for a non-terminal state");
  const double r1 = loading_utility(final_state.max_rho);
  const double r2 = static_cast<double>(window.size());
  const double r3 = loading_utility(window.hours.empty() ? 0.0 : window.aggregate);
  return w.w1 * r1 + w.w2 * r2 + w.w3 * r3;
}

inline double aza_step_reward(const TopologyConfig& prev_topo, const TopologyConfig& cur_topo,
                              const ContingencyReport& report, const RewardWeights& w) {
  return w.w1 * loading_utility(report.max_rho) + w.w2 * (prev_topo == cur_topo ? 1.0 : 0.0);
}

/// Substations whose line ends are not all on bus A.
inline std::vector<int> manipulated_substations(const Grid& grid, const TopologyConfig& topo) {
  std::vector<int> out;
  for (int s = 0; s < grid.substation_count(); ++s)
    for (int e : grid.line_ends_at(s))
      if (topo.end_bus(e) != Bus::A) {
        out.push_back(s);
        break;
      }
  return out;
}

/// Exhaustive search over injection bus placement at the manipulated
/// substations, minimising max_rho_n1. Ties go to fewer injections on bus B,
/// then to the lexicographically smallest assignment.
inline TopologyConfig optimize_injection_topology(ScreeningCache& cache, const TopologyConfig& topo,
                                                  std::span<const double> injections) {
  const Grid& grid = cache.grid();
  std::vector<int> movable;
  for (int s : manipulated_substations(grid, topo))
    for (int k : grid.injections_at(s)) movable.push_back(k);
  if (movable.empty()) return topo;
  if (movable.size() > 20) throw ValidationError("too many injections to enumerate");
  std::sort(movable.begin(), movable.end());
  const auto screener = cache.get(topo);

  std::optional<TopologyConfig> best;
  double best_rho = 0.0;
  int best_on_b = 0;
  const std::size_t m = movable.size();
  TopologyConfig cand = topo;
  for (unsigned mask = 0; mask < (1U << m); ++mask) {
    std::vector<Bus> assign(m);
    // Bit (m-1-i) drives movable[i] so ascending masks are lexicographic.
    for (std::size_t i = 0; i < m; ++i) {
      assign[i] = ((mask >> (m - 1 - i)) & 1U) ? Bus::B : Bus::A;
      cand.set_injection_bus(movable[i], assign[i]);
    }
    bool feasible = true;
    for (int s : manipulated_substations(grid, topo)) {
      try {
        detail::check_not_stranded(grid, cand, s);
      } catch (const InfeasibleConfigError&) {
        feasible = false;
        break;
      }
    }
    if (!feasible) continue;
    const double rho = screener->screen(cand, injections).max_rho;
    const int on_b = static_cast<int>(std::count(assign.begin(), assign.end(), Bus::B));
    const bool better = !best || rho < best_rho || (rho == best_rho && on_b < best_on_b);
    if (better) {
      best = cand;
      best_rho = rho;
      best_on_b = on_b;
    }
  }
  if (!best) throw InfeasibleConfigError("no feasible injection placement");
  return *best;
}

inline TopologyConfig optimize_injection_topology(const Grid& grid, const TopologyConfig& topo,
                                                  std::span<const double> injections) {
  ScreeningCache cache(grid);
  return optimize_injection_topology(cache, topo, injections);
}

/// Terminal evaluation of an episode: injection placement is optimised for
/// the episode's timestamp before the reward is computed.
struct TerminalOutcome {
  TopologyConfig topo;
  double max_rho = 0.0;
  StableWindow window;
  double reward = 0.0;
};

class Environment {
 public:
  explicit Environment(ScreeningCache& cache, RewardWeights weights = RewardWeights::ssa())
      : cache_(&cache), weights_(weights) {}

  const Grid& grid() const { return cache_->grid(); }
  ScreeningCache& cache() const { return *cache_; }
  const RewardWeights& weights() const { return weights_; }

  EnvState reset(const DayScenario& day, int hour) const {
    if (hour < 1 || hour > kHours) throw ValidationError("timestamp out of range");
    EnvState s;
    s.topo = TopologyConfig::reference(grid());
    s.hour = hour;
    refresh(s, day);
    return s;
  }

  /// Applies `action` (std::nullopt terminates). Returns a new state.
  EnvState step(const EnvState& state, const std::optional<UnitaryAction>& action, const DayScenario& day) const {
    if (state.terminal) throw ValidationError("step on a terminal state");
    EnvState next = state;
    if (!action) {
      next.terminal = true;
      return next;
    }
    if (state.actions_taken >= kMaxDepth) throw ValidationError("action budget exceeded");
    next.topo = apply_unitary_action(grid(), state.topo, *action);
    next.actions_taken += 1;
    next.trace.push_back(*action);
    refresh(next, day);
    if (next.actions_taken >= kMaxDepth) next.terminal = true;
    return next;
  }

  TerminalOutcome terminal_outcome(const EnvState& final_state, const DayScenario& day) const {
    TerminalOutcome out;
    out.topo = optimize_injection_topology(*cache_, final_state.topo, day.at(final_state.hour));
    EnvState s = final_state;
    s.topo = out.topo;
    s.terminal = true;
    s.max_rho = cache_->screen(out.topo, day.at(s.hour)).max_rho;
    out.max_rho = s.max_rho;
    out.window = stable_window(*cache_, out.topo, day, s.hour);
    out.reward = ssa_terminal_reward(s, out.window, weights_);
    return out;
  }

 private:
  void refresh(EnvState& s, const DayScenario& day) const {
    const auto screener = cache_->get(s.topo);
    const auto& p = day.at(s.hour);
    const auto f = screener->flows(s.topo, p);
    s.loadings.assign(f.size(), 0.0);
    for (std::size_t l = 0; l < f.size(); ++l) s.loadings[l] = std::abs(f[l]) / grid().line(static_cast<int>(l)).p_max;
    s.max_rho = screener->screen(s.topo, p).max_rho;
  }

  ScreeningCache* cache_;
  RewardWeights weights_;
};

}  // namespace gridplan
