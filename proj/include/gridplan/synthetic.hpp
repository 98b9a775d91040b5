#pragma once

// Synthetic desk-scale benchmark: a meshed 14-substation grid with looped
// spurs, and day scenarios following a diurnal demand curve with scripted
// congestion windows (transfer surges between a source and a sink area).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "gridplan/environment.hpp"
#include "gridplan/grid.hpp"
#include "gridplan/powerflow.hpp"
#include "gridplan/scenario.hpp"

namespace gridplan {

/// A scripted congestion pattern: during the window, `sources` ramp up and
/// `sinks` draw more power.
struct CongestionPocket {
  std::vector<int> sources;  // generator injection ids
  std::vector<int> sinks;    // load injection ids
  double weight = 1.0;
};

struct DemandProfile {
  std::vector<double> share;  // per injection nominal magnitude (MW at peak)
  double night_fraction = 0.6;
  double day_spread = 0.05;     // uniform day-level demand factor 1 +/- spread
  double noise = 0.04;          // per (hour, injection) multiplicative noise
  double congestion_fraction = 0.9;
  std::vector<CongestionPocket> pockets;
  double surge_min = 0.4;       // relative surge of sinks and sources
  double surge_max = 0.8;
  int window_min = 3;
  int window_max = 6;
  int window_start_min = 7;
  int window_start_max = 19;
  double drift = 0.1;           // relative surge growth per 100 days of id
};

/// Diurnal demand multiplier, minimum at 04:00 and maximum at 16:00.
inline double diurnal_factor(const DemandProfile& p, int hour) {
  const double phase = 2.0 * std::numbers::pi * (hour - 4) / 24.0;
  return p.night_fraction + (1.0 - p.night_fraction) * (0.5 - 0.5 * std::cos(phase));
}

/// Deterministic in (grid, profile, seed, count). Day ids are 0..count-1.
inline std::vector<DayScenario> generate_synthetic_days(const Grid& grid, int count, const DemandProfile& profile,
                                                        std::uint64_t seed) {
  if (count < 1) throw ValidationError("day count must be at least 1");
  const int n_inj = grid.injection_count();
  if (!profile.share.empty() && static_cast<int>(profile.share.size()) != n_inj)
    throw ValidationError("profile share vector does not match the grid");
  std::vector<double> share = profile.share;
  if (share.empty()) share.assign(n_inj, 1.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };

  double pocket_total = 0.0;
  for (const auto& pk : profile.pockets) pocket_total += pk.weight;

  std::vector<DayScenario> days;
  for (int d = 0; d < count; ++d) {
    DayScenario day;
    day.id = d;
    const double day_factor = uniform(1.0 - profile.day_spread, 1.0 + profile.day_spread);
    int w_start = 0, w_len = 0;
    const CongestionPocket* pocket = nullptr;
    double surge = 0.0;
    const bool congested = unit(rng) < profile.congestion_fraction && pocket_total > 0.0;
    if (congested) {
      double pick = unit(rng) * pocket_total;
      for (const auto& pk : profile.pockets) {
        pocket = &pk;
        if ((pick -= pk.weight) < 0.0) break;
      }
      w_len = profile.window_min + static_cast<int>(unit(rng) * (profile.window_max - profile.window_min + 1));
      w_len = std::min(w_len, profile.window_max);
      w_start = profile.window_start_min +
                static_cast<int>(unit(rng) * (profile.window_start_max - profile.window_start_min + 1));
      w_start = std::min(w_start, profile.window_start_max);
      surge = uniform(profile.surge_min, profile.surge_max) * (1.0 + profile.drift * d / 100.0);
    }
    for (int h = 1; h <= kHours; ++h) {
      std::vector<double> p(n_inj, 0.0);
      const double base = diurnal_factor(profile, h) * day_factor;
      for (int k = 0; k < n_inj; ++k) {
        const double mag = share[k] * base * uniform(1.0 - profile.noise, 1.0 + profile.noise);
        p[k] = grid.injections()[k].kind == InjectionKind::Generator ? mag : -mag;
      }
      if (pocket && h >= w_start && h < w_start + w_len) {
        // Ramp in and out over the first and last window hours.
        const int into = h - w_start, left = w_start + w_len - 1 - h;
        const double ramp = (std::min(into, left) == 0 && w_len > 2) ? 0.6 : 1.0;
        for (int k : pocket->sinks) p[k] *= 1.0 + surge * ramp;
        for (int k : pocket->sources) p[k] *= 1.0 + 2.0 * surge * ramp;
      }
      balance_injections(grid, p);
      day.hours[h - 1] = std::move(p);
    }
    days.push_back(std::move(day));
  }

  // Generation fails if any base case is unsolvable.
  ScreeningCache cache(grid);
  const auto ref = TopologyConfig::reference(grid);
  for (const auto& day : days)
    for (int h = 1; h <= kHours; ++h) {
      const double rho = cache.screen(ref, day.at(h)).max_rho;
      if (!std::isfinite(rho)) throw ValidationError("profile produces an unsolvable base case");
    }
  return days;
}

struct SyntheticGridParams {
  double limit_margin = 2.0;           // p_max over the calibration N-1 worst flow
  double limit_floor_fraction = 0.3;   // minimum p_max relative to the largest limit
  std::vector<int> weak_lines = {3, 4};  // lines rated close to their calm N-1 flow
  double weak_margin = 1.05;
  int calibration_days = 60;
  std::uint64_t calibration_seed = 99;
};

/// Topology, injections and nominal magnitudes of the desk benchmark. Limits
/// are placeholders until calibrated.
struct SyntheticLayout {
  GridDescription desc;
  DemandProfile profile;
};

inline SyntheticLayout desk_layout() {
  SyntheticLayout out;
  GridDescription& g = out.desc;
  g.name = "desk14";
  for (int s = 0; s < 14; ++s) g.substations.push_back({s, "S" + std::to_string(s)});
  // Meshed core 0..5 (ring plus two chords) and four looped spurs.
  const int lines[20][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}, {0, 3}, {1, 4},
                            {1, 6}, {6, 7}, {7, 2},   // spur 6-7
                            {3, 8}, {8, 9}, {9, 4},   // spur 8-9
                            {5, 10}, {10, 11}, {11, 0},  // spur 10-11
                            {2, 12}, {12, 13}, {13, 5}};  // spur 12-13
  const double susceptance[20] = {12, 9, 11, 10, 8, 13, 7, 6, 10, 9, 8, 11, 10, 9, 12, 8, 10, 9, 11, 10};
  for (int l = 0; l < 20; ++l) g.lines.push_back({l, lines[l][0], lines[l][1], susceptance[l], 1.0});
  // (substation, kind, nominal MW)
  struct Inj {
    int sub;
    InjectionKind kind;
    double mw;
  };
  const Inj injs[22] = {
      {0, InjectionKind::Generator, 260}, {0, InjectionKind::Load, 60},    {1, InjectionKind::Load, 90},
      {2, InjectionKind::Load, 80},       {2, InjectionKind::Generator, 90}, {3, InjectionKind::Load, 110},
      {4, InjectionKind::Load, 70},       {4, InjectionKind::Generator, 120}, {5, InjectionKind::Generator, 180},
      {5, InjectionKind::Load, 50},       {6, InjectionKind::Load, 70},    {7, InjectionKind::Load, 60},
      {7, InjectionKind::Generator, 60},  {8, InjectionKind::Load, 80},    {9, InjectionKind::Load, 60},
      {9, InjectionKind::Generator, 80},  {10, InjectionKind::Generator, 140}, {10, InjectionKind::Load, 40},
      {11, InjectionKind::Load, 90},      {12, InjectionKind::Load, 70},   {13, InjectionKind::Load, 60},
      {13, InjectionKind::Generator, 70}};
  for (int k = 0; k < 22; ++k) {
    g.injections.push_back({k, injs[k].sub, injs[k].kind, ""});
    out.profile.share.push_back(injs[k].mw);
  }
  out.profile.pockets = {
      {{0}, {5, 6}, 1.0},   // sub 0 generation towards subs 3/4
      {{8}, {2, 3}, 1.0},   // sub 5 generation towards subs 1/2
      {{7, 4}, {1, 9}, 0.5},  // subs 4/2 generation towards subs 0/5
  };
  return out;
}

/// Sets every line limit from N-1 flows of uncongested calibration days in
/// the reference topology.
inline Grid calibrate_limits(GridDescription desc, const DemandProfile& profile, const SyntheticGridParams& params) {
  for (auto& l : desc.lines) l.p_max = 1.0;
  const Grid probe = Grid::build(desc);
  DemandProfile calm = profile;
  calm.congestion_fraction = 0.0;
  const auto days = generate_synthetic_days(probe, params.calibration_days, calm, params.calibration_seed);
  ContingencyScreener screener(probe, TopologyConfig::reference(probe));
  const auto ref = TopologyConfig::reference(probe);
  std::vector<double> worst(probe.line_count(), 0.0);
  for (const auto& day : days)
    for (int h = 1; h <= kHours; ++h) {
      const auto w = screener.line_worst_loading(ref, day.at(h));  // p_max = 1 -> MW
      for (int l = 0; l < probe.line_count(); ++l) worst[l] = std::max(worst[l], w[l]);
    }
  const double top = *std::max_element(worst.begin(), worst.end()) * params.limit_margin;
  for (int l = 0; l < probe.line_count(); ++l) {
    const bool weak = std::find(params.weak_lines.begin(), params.weak_lines.end(), l) != params.weak_lines.end();
    const double margin = weak ? params.weak_margin : params.limit_margin;
    const double lim = std::max(margin * worst[l], params.limit_floor_fraction * top);
    desc.lines[l].p_max = std::round(lim);
  }
  return Grid::build(std::move(desc));
}

inline Grid make_desk_grid(const SyntheticGridParams& params = {}) {
  auto layout = desk_layout();
  return calibrate_limits(std::move(layout.desc), layout.profile, params);
}

inline DemandProfile desk_profile() { return desk_layout().profile; }

}  // namespace gridplan
