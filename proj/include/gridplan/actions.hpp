#pragma once

// Fixed catalogue of substation actions derived from a target topology set,
// per-state masking by the K nearest targets, and state feature encoding.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <vector>

#include "gridplan/environment.hpp"
#include "gridplan/grid.hpp"
#include "gridplan/targets.hpp"

namespace gridplan {

/// Per split substation slot: -1 for all-A, otherwise the split option.
using Signature = std::vector<std::int16_t>;

class ActionSpace {
 public:
  ActionSpace(const Grid& grid, TargetGenerationParams target_params = {}, int nearest = 64)
      : grid_(&grid),
        target_params_(target_params),
        nearest_(nearest),
        targets_(generate_target_topologies(grid, target_params)) {
    if (nearest < 1) throw ValidationError("nearest-target count must be positive");
    const auto& subs = targets_.split_substations();
    const auto& opts = targets_.split_options();
    for (std::size_t slot = 0; slot < subs.size(); ++slot) {
      offsets_.push_back(static_cast<int>(catalogue_.size()));
      LocalConfig restore;
      restore.line_ends.assign(grid.line_ends_at(subs[slot]).size(), Bus::A);
      restore.injections.assign(grid.injections_at(subs[slot]).size(), Bus::A);
      catalogue_.push_back({subs[slot], restore});
      for (const auto& o : opts[slot]) catalogue_.push_back({subs[slot], o});
    }
    for (const auto& t : targets_.members()) target_sigs_.push_back(*signature(t.config));
  }

  const Grid& grid() const { return *grid_; }
  const TargetTopologySet& targets() const { return targets_; }
  const TargetGenerationParams& target_params() const { return target_params_; }
  int nearest() const { return nearest_; }

  /// Catalogue size plus the terminate action.
  int size() const { return static_cast<int>(catalogue_.size()) + 1; }
  int terminate_index() const { return static_cast<int>(catalogue_.size()); }
  const SubstationAction& action(int index) const { return catalogue_.at(index); }
  int slot_count() const { return static_cast<int>(offsets_.size()); }
  int option_count(int slot) const { return static_cast<int>(targets_.split_options()[slot].size()); }

  std::optional<int> index_of(const UnitaryAction& a) const {
    const auto* sa = std::get_if<SubstationAction>(&a);
    if (!sa) return std::nullopt;
    for (int i = 0; i < static_cast<int>(catalogue_.size()); ++i)
      if (catalogue_[i].substation == sa->substation && catalogue_[i].target.line_ends == sa->target.line_ends)
        return i;
    return std::nullopt;
  }

  /// Slot encoding of a topology's branch assignment, or nullopt when it
  /// deviates outside the catalogue (other substations, offline lines,
  /// unknown splits).
  std::optional<Signature> signature(const TopologyConfig& topo) const {
    const Grid& g = *grid_;
    for (int l = 0; l < g.line_count(); ++l)
      if (!topo.line_online(l)) return std::nullopt;
    const auto& subs = targets_.split_substations();
    Signature sig(subs.size(), -1);
    std::size_t slot = 0;
    for (int s = 0; s < g.substation_count(); ++s) {
      const bool is_slot = slot < subs.size() && subs[slot] == s;
      bool all_a = true;
      for (int e : g.line_ends_at(s)) all_a = all_a && topo.end_bus(e) == Bus::A;
      if (!is_slot) {
        if (!all_a) return std::nullopt;
        continue;
      }
      if (!all_a) {
        const auto& opts = targets_.split_options()[slot];
        int found = -1;
        for (std::size_t o = 0; o < opts.size() && found < 0; ++o) {
          bool same = true;
          const auto& ends = g.line_ends_at(s);
          for (std::size_t i = 0; i < ends.size() && same; ++i) same = topo.end_bus(ends[i]) == opts[o].line_ends[i];
          if (same) found = static_cast<int>(o);
        }
        if (found < 0) return std::nullopt;
        sig[slot] = static_cast<std::int16_t>(found);
      }
      ++slot;
    }
    return sig;
  }

  /// Indices of the K targets nearest to `topo` (distance > 0), ordered by
  /// distance then target index.
  std::vector<int> nearest_targets(const TopologyConfig& topo, int k) const {
    const auto sig = signature(topo);
    std::vector<std::pair<int, int>> dist;  // (distance, target)
    dist.reserve(target_sigs_.size());
    for (int t = 0; t < static_cast<int>(target_sigs_.size()); ++t) {
      int d = 0;
      if (sig) {
        for (std::size_t i = 0; i < sig->size(); ++i) d += (*sig)[i] != target_sigs_[t][i];
      } else {
        d = topology_distance(*grid_, topo, targets_[t].config);
      }
      if (d > 0) dist.emplace_back(d, t);
    }
    const std::size_t keep = std::min<std::size_t>(dist.size(), static_cast<std::size_t>(std::max(k, 0)));
    std::partial_sort(dist.begin(), dist.begin() + keep, dist.end());
    std::vector<int> out;
    for (std::size_t i = 0; i < keep; ++i) out.push_back(dist[i].second);
    return out;
  }

  /// Catalogue actions appearing in decompositions towards the K nearest
  /// targets whose result stays connected, plus terminate. Sorted.
  std::vector<int> valid_actions(const TopologyConfig& topo, int actions_taken) const {
    std::vector<int> out;
    if (actions_taken < kMaxDepth) {
      const auto sig = signature(topo);
      std::vector<char> used(catalogue_.size(), 0);
      for (int t : nearest_targets(topo, nearest_)) {
        if (sig) {
          for (int slot = 0; slot < slot_count(); ++slot) {
            const int want = target_sigs_[t][slot];
            if (want != (*sig)[slot]) used[offsets_[slot] + want + 1] = 1;
          }
        } else {
          for (const auto& a : decompose_target(*grid_, topo, targets_[t].config))
            if (auto idx = index_of(a)) used[*idx] = 1;
        }
      }
      for (int i = 0; i < static_cast<int>(catalogue_.size()); ++i) {
        if (!used[i]) continue;
        TopologyConfig next = topo;
        next.set_local(*grid_, catalogue_[i].substation, catalogue_[i].target);
        if (connected(next)) out.push_back(i);
      }
    }
    out.push_back(terminate_index());
    return out;
  }

 private:
  bool connected(const TopologyConfig& topo) const {
    const auto sig = signature(topo);
    if (!sig) return is_connected(*grid_, topo);
    std::lock_guard lock(mu_);
    auto it = connected_.find(*sig);
    if (it != connected_.end()) return it->second;
    const bool c = is_connected(*grid_, topo);
    connected_.emplace(*sig, c);
    return c;
  }

  const Grid* grid_;
  TargetGenerationParams target_params_;
  int nearest_;
  TargetTopologySet targets_;
  std::vector<SubstationAction> catalogue_;
  std::vector<int> offsets_;
  std::vector<Signature> target_sigs_;
  mutable std::mutex mu_;
  mutable std::map<Signature, bool> connected_;
};

/// Which lines feed the policy input, in index order.
struct FeatureConfig {
  std::vector<int> monitored_lines;
};

/// The `count` lines with the highest mean reference N-1 loading over the
/// given hours, returned in ascending index order.
inline FeatureConfig select_monitored_lines(ScreeningCache& cache, const std::vector<const DayScenario*>& days,
                                            int count) {
  const Grid& grid = cache.grid();
  const auto ref = TopologyConfig::reference(grid);
  std::vector<double> mean(grid.line_count(), 0.0);
  const auto screener = cache.get(ref);
  for (const auto* d : days)
    for (int h = 1; h <= kHours; ++h) {
      const auto w = screener->line_worst_loading(ref, d->at(h));
      for (int l = 0; l < grid.line_count(); ++l) mean[l] += w[l];
    }
  std::vector<int> order(grid.line_count());
  for (int l = 0; l < grid.line_count(); ++l) order[l] = l;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mean[a] > mean[b]; });
  if (count < static_cast<int>(order.size())) order.resize(std::max(count, 0));
  std::sort(order.begin(), order.end());
  return {order};
}

/// Slot one-hots, per monitored line base and N-1 loading, hour phase and
/// remaining action budget.
inline int feature_size(const ActionSpace& space, const FeatureConfig& fc) {
  int n = 0;
  for (int s = 0; s < space.slot_count(); ++s) n += space.option_count(s) + 1;
  return n + 2 * static_cast<int>(fc.monitored_lines.size()) + 3;
}

inline std::vector<double> topology_encoding(const ActionSpace& space, const TopologyConfig& topo) {
  std::vector<double> x;
  const auto sig = space.signature(topo);
  for (int s = 0; s < space.slot_count(); ++s) {
    const int n = space.option_count(s) + 1;
    const int hot = sig ? (*sig)[s] + 1 : 0;
    for (int i = 0; i < n; ++i) x.push_back(i == hot ? 1.0 : 0.0);
  }
  return x;
}

inline std::vector<double> state_features(const ActionSpace& space, const FeatureConfig& fc, const EnvState& s,
                                          const std::vector<double>& n1_loadings) {
  std::vector<double> x = topology_encoding(space, s.topo);
  for (int l : fc.monitored_lines) {
    x.push_back(std::min(s.loadings.at(l), 3.0));
    x.push_back(std::min(n1_loadings.at(l), 3.0));
  }
  const double phase = 2.0 * std::numbers::pi * s.hour / kHours;
  x.push_back(std::sin(phase));
  x.push_back(std::cos(phase));
  x.push_back(static_cast<double>(s.actions_taken) / kMaxDepth);
  return x;
}

}  // namespace gridplan
