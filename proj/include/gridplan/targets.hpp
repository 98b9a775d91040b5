#pragma once

// Candidate target topologies of depth <= 3 built from two-bus splits of
// the most connected substations.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "gridplan/grid.hpp"
#include "gridplan/powerflow.hpp"

namespace gridplan {

inline constexpr int kMaxDepth = 3;

struct TargetGenerationParams {
  int substations = 6;          // how many of the most connected substations may split
  std::size_t cap = 10000;      // total target count limit
  int min_ends_per_bus = 2;     // line ends required on each side of a split
  int max_depth = kMaxDepth;
};

struct TargetTopology {
  TopologyConfig config;
  int depth = 0;
};

class TargetTopologySet {
 public:
  TargetTopologySet() = default;
  explicit TargetTopologySet(const Grid& grid) : grid_(&grid) {}

  void add(TopologyConfig config) {
    const int depth = topological_depth(*grid_, config);
    if (depth > kMaxDepth) throw ValidationError("target topology deeper than " + std::to_string(kMaxDepth));
    members_.push_back({std::move(config), depth});
  }

  const std::vector<TargetTopology>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  const TargetTopology& operator[](std::size_t i) const { return members_[i]; }

  /// Substations that appear in some split, with their split options.
  const std::vector<int>& split_substations() const { return split_substations_; }
  const std::vector<std::vector<LocalConfig>>& split_options() const { return split_options_; }
  void set_split_options(std::vector<int> subs, std::vector<std::vector<LocalConfig>> options) {
    split_substations_ = std::move(subs);
    split_options_ = std::move(options);
  }

 private:
  const Grid* grid_ = nullptr;
  std::vector<TargetTopology> members_;
  std::vector<int> split_substations_;
  std::vector<std::vector<LocalConfig>> split_options_;
};

/// Substations ordered by degree (descending), index breaking ties.
inline std::vector<int> most_connected_substations(const Grid& grid, int count) {
  std::vector<int> subs(grid.substation_count());
  for (int s = 0; s < grid.substation_count(); ++s) subs[s] = s;
  std::stable_sort(subs.begin(), subs.end(), [&](int a, int b) { return grid.degree(a) > grid.degree(b); });
  if (count < static_cast<int>(subs.size())) subs.resize(std::max(count, 0));
  return subs;
}

/// All two-bus splits of a substation's line ends with at least
/// `min_ends_per_bus` ends per bus. The lowest end stays on bus A so each
/// partition appears once; injections stay on bus A.
inline std::vector<LocalConfig> enumerate_splits(const Grid& grid, int s, int min_ends_per_bus) {
  const int n = grid.degree(s);
  std::vector<LocalConfig> out;
  if (n < 2 * min_ends_per_bus || n > 20) return out;
  for (unsigned mask = 0; mask < (1U << n); ++mask) {
    if (mask & 1U) continue;
    const int on_b = __builtin_popcount(mask);
    if (on_b < min_ends_per_bus || n - on_b < min_ends_per_bus) continue;
    LocalConfig c;
    for (int i = 0; i < n; ++i) c.line_ends.push_back((mask >> i) & 1U ? Bus::B : Bus::A);
    c.injections.assign(grid.injections_at(s).size(), Bus::A);
    out.push_back(std::move(c));
  }
  return out;
}

/// Singles, then pairs, then triples of substation splits, keeping only
/// configurations whose online electrical graph stays connected.
inline TargetTopologySet generate_target_topologies(const Grid& grid, const TargetGenerationParams& params = {}) {
  TargetTopologySet set(grid);
  std::vector<int> subs;
  std::vector<std::vector<LocalConfig>> options;
  for (int s : most_connected_substations(grid, params.substations)) {
    auto splits = enumerate_splits(grid, s, params.min_ends_per_bus);
    if (splits.empty()) continue;
    subs.push_back(s);
    options.push_back(std::move(splits));
  }
  // Keep substation order ascending so feature layouts are stable.
  std::vector<std::size_t> order(subs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return subs[a] < subs[b]; });
  std::vector<int> sorted_subs;
  std::vector<std::vector<LocalConfig>> sorted_options;
  for (std::size_t i : order) {
    sorted_subs.push_back(subs[i]);
    sorted_options.push_back(std::move(options[i]));
  }
  set.set_split_options(sorted_subs, sorted_options);

  const TopologyConfig ref = TopologyConfig::reference(grid);
  const int n = static_cast<int>(sorted_subs.size());
  std::vector<std::pair<int, int>> chosen;  // (substation slot, option)
  auto emit = [&]() {
    if (set.size() >= params.cap) return;
    TopologyConfig t = ref;
    for (auto [slot, opt] : chosen) t.set_local(grid, sorted_subs[slot], sorted_options[slot][opt]);
    if (is_connected(grid, t)) set.add(std::move(t));
  };
  auto recurse = [&](auto&& self, int start, int remaining) -> void {
    if (remaining == 0) {
      emit();
      return;
    }
    for (int slot = start; slot < n && set.size() < params.cap; ++slot) {
      for (int opt = 0; opt < static_cast<int>(sorted_options[slot].size()); ++opt) {
        chosen.emplace_back(slot, opt);
        self(self, slot + 1, remaining - 1);
        chosen.pop_back();
      }
    }
  };
  for (int depth = 1; depth <= std::min(params.max_depth, kMaxDepth); ++depth) recurse(recurse, 0, depth);
  return set;
}

}  // namespace gridplan
