#pragma once

// Two-objective minimisation helpers: weak-domination filtering, 2-D
// hypervolume and per-day / per-split summary statistics.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gridplan/error.hpp"

namespace gridplan {

struct ObjectivePoint {
  double max_rho = 0.0;
  int n_switching = 0;
  friend bool operator==(const ObjectivePoint&, const ObjectivePoint&) = default;
};

inline constexpr ObjectivePoint kHypervolumeReference{3.1, 25};

/// a weakly dominates b: no worse on both axes.
inline bool weakly_dominates(const ObjectivePoint& a, const ObjectivePoint& b) {
  return a.max_rho <= b.max_rho && a.n_switching <= b.n_switching;
}

/// Items whose objectives are not weakly dominated by a distinct point.
/// Duplicates keep their first occurrence. Result sorted by switching, then
/// loading.
template <typename T, typename Proj>
std::vector<T> non_dominated(const std::vector<T>& items, Proj proj) {
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const ObjectivePoint pa = proj(items[a]), pb = proj(items[b]);
    if (pa.n_switching != pb.n_switching) return pa.n_switching < pb.n_switching;
    return pa.max_rho < pb.max_rho;
  });
  // After sorting, a point survives iff its loading beats every earlier kept one.
  std::vector<T> out;
  double best = 0.0;
  bool any = false;
  for (std::size_t i : order) {
    const ObjectivePoint p = proj(items[i]);
    if (any && !(p.max_rho < best)) continue;
    out.push_back(items[i]);
    best = p.max_rho;
    any = true;
  }
  return out;
}

inline std::vector<ObjectivePoint> non_dominated_filter(const std::vector<ObjectivePoint>& points) {
  return non_dominated(points, [](const ObjectivePoint& p) { return p; });
}

/// Area dominated by `points` inside the box [0, ref]. Points are clipped to
/// the box, so anything at or beyond `ref` on an axis adds nothing.
inline double hypervolume2d(std::span<const ObjectivePoint> points, ObjectivePoint ref = kHypervolumeReference) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : points) {
    const double x = std::clamp(p.max_rho, 0.0, ref.max_rho);
    const double y = std::clamp<double>(p.n_switching, 0.0, ref.n_switching);
    if (x < ref.max_rho && y < ref.n_switching) pts.emplace_back(x, y);
  }
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  double floor_y = ref.n_switching;
  for (const auto& [x, y] : pts) {
    if (y >= floor_y) continue;
    area += (ref.max_rho - x) * (floor_y - y);
    floor_y = y;
  }
  return area;
}

struct DayMetrics {
  double best_max_rho = 0.0;
  bool solved = false;
  int best_n_switching = 0;
  double hypervolume = 0.0;
};

/// Best loading over the plans, whether it is below 1, and the switching
/// count of the plan reaching it (fewest switches on ties).
inline DayMetrics day_metrics(std::span<const ObjectivePoint> plans, ObjectivePoint ref = kHypervolumeReference) {
  if (plans.empty()) throw ValidationError("day metrics need at least one plan");
  DayMetrics m;
  m.best_max_rho = plans[0].max_rho;
  m.best_n_switching = plans[0].n_switching;
  for (const auto& p : plans)
    if (p.max_rho < m.best_max_rho || (p.max_rho == m.best_max_rho && p.n_switching < m.best_n_switching)) {
      m.best_max_rho = p.max_rho;
      m.best_n_switching = p.n_switching;
    }
  m.solved = m.best_max_rho < 1.0;
  m.hypervolume = hypervolume2d(plans, ref);
  return m;
}

struct Summary {
  int count = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
};

/// Linearly interpolated quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return 0.0;
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline Summary summarize(std::vector<double> v) {
  Summary s;
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile_sorted(v, 0.25);
  s.median = quantile_sorted(v, 0.5);
  s.q3 = quantile_sorted(v, 0.75);
  double total = 0.0;
  for (double x : v) total += x;
  s.mean = total / static_cast<double>(v.size());
  return s;
}

}  // namespace gridplan
