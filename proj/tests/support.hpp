#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "gridplan/grid.hpp"
#include "gridplan/powerflow.hpp"
#include "gridplan/scenario.hpp"

namespace testsupport {

using namespace gridplan;

struct LineSpec {
  int from, to;
  double b = 1.0, p_max = 1.0;
};

inline Grid make_grid(int n_sub, const std::vector<LineSpec>& lines, const std::vector<std::pair<int, InjectionKind>>& inj) {
  GridDescription d;
  d.name = "test";
  for (int s = 0; s < n_sub; ++s) d.substations.push_back({s, "s" + std::to_string(s)});
  for (const auto& l : lines) d.lines.push_back({0, l.from, l.to, l.b, l.p_max});
  for (const auto& [s, k] : inj) d.injections.push_back({0, s, k, ""});
  return Grid::build(d);
}

inline Grid two_bus(double p_max = 1.0) {
  return make_grid(2, {{0, 1, 1.0, p_max}}, {{0, InjectionKind::Generator}, {1, InjectionKind::Load}});
}

/// Lines 0-1, 0-2, 2-1; one injection per substation (gen, load, load).
inline Grid triangle(double p_max = 1.0) {
  return make_grid(3, {{0, 1, 1.0, p_max}, {0, 2, 1.0, p_max}, {2, 1, 1.0, p_max}},
                   {{0, InjectionKind::Generator}, {1, InjectionKind::Load}, {2, InjectionKind::Load}});
}

/// Random tree plus extra edges (parallel lines allowed); every substation
/// carries one generator or load, plus a few extra injections.
inline Grid random_grid(std::mt19937_64& rng, int n_sub) {
  std::uniform_real_distribution<double> b(0.5, 5.0), pm(0.5, 3.0), unit(0.0, 1.0);
  std::vector<LineSpec> lines;
  for (int s = 1; s < n_sub; ++s) lines.push_back({static_cast<int>(rng() % s), s, b(rng), pm(rng)});
  const int extra = n_sub / 2 + static_cast<int>(rng() % (n_sub / 2 + 1));
  for (int e = 0; e < extra; ++e) {
    const int a = static_cast<int>(rng() % n_sub), c = static_cast<int>(rng() % n_sub);
    if (a != c) lines.push_back({a, c, b(rng), pm(rng)});
  }
  std::shuffle(lines.begin(), lines.end(), rng);
  std::vector<std::pair<int, InjectionKind>> inj;
  for (int s = 0; s < n_sub; ++s) inj.push_back({s, unit(rng) < 0.4 ? InjectionKind::Generator : InjectionKind::Load});
  inj[0].second = InjectionKind::Generator;
  for (int k = 0; k < n_sub / 4; ++k)
    inj.push_back({static_cast<int>(rng() % n_sub), unit(rng) < 0.5 ? InjectionKind::Generator : InjectionKind::Load});
  return make_grid(n_sub, lines, inj);
}

/// Random magnitudes, loads negative, generators rescaled to balance.
inline std::vector<double> random_injections(const Grid& grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.1, 2.0);
  std::vector<double> p(grid.injection_count());
  for (int k = 0; k < grid.injection_count(); ++k)
    p[k] = grid.injections()[k].kind == InjectionKind::Generator ? mag(rng) : -mag(rng);
  balance_injections(grid, p);
  return p;
}

/// Random topology: a few substations get a random bus assignment and a
/// line or two go offline. Not necessarily connected.
inline TopologyConfig random_topology(const Grid& grid, std::mt19937_64& rng, int splits, int outages) {
  auto t = TopologyConfig::reference(grid);
  for (int i = 0; i < splits; ++i) {
    const int s = static_cast<int>(rng() % grid.substation_count());
    for (int e : grid.line_ends_at(s)) t.set_end_bus(e, rng() % 2 ? Bus::B : Bus::A);
    for (int k : grid.injections_at(s)) t.set_injection_bus(k, rng() % 2 ? Bus::B : Bus::A);
  }
  for (int i = 0; i < outages; ++i) t.set_line_online(static_cast<int>(rng() % grid.line_count()), false);
  return t;
}

/// Dense DC model built straight from the element assignment: one node per
/// (substation, bus) that carries an online line end or an injection.
struct DenseModel {
  int nodes = 0;
  std::vector<int> from, to;  // per line, -1 when offline
  std::vector<double> b;
  std::vector<double> p;  // per node

  DenseModel(const Grid& grid, const TopologyConfig& t, const std::vector<double>& inj) {
    std::map<std::pair<int, int>, int> id;
    auto node = [&](int s, Bus bus) {
      auto [it, fresh] = id.emplace(std::make_pair(s, static_cast<int>(bus)), nodes);
      if (fresh) ++nodes;
      return it->second;
    };
    for (int l = 0; l < grid.line_count(); ++l) {
      b.push_back(grid.line(l).susceptance);
      if (!t.line_online(l)) {
        from.push_back(-1);
        to.push_back(-1);
        continue;
      }
      from.push_back(node(grid.line(l).from, t.end_bus(end_index(l, false))));
      to.push_back(node(grid.line(l).to, t.end_bus(end_index(l, true))));
    }
    std::vector<int> inj_node;
    for (int k = 0; k < grid.injection_count(); ++k)
      inj_node.push_back(node(grid.injections()[k].substation, t.injection_bus(k)));
    p.assign(nodes, 0.0);
    for (int k = 0; k < grid.injection_count(); ++k) p[inj_node[k]] += inj[k];
  }

  bool connected(int skip_line = -1) const {
    std::vector<int> parent(nodes);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x];
      return x;
    };
    int comps = nodes;
    for (std::size_t l = 0; l < from.size(); ++l) {
      if (from[l] < 0 || static_cast<int>(l) == skip_line) continue;
      const int a = find(from[l]), c = find(to[l]);
      if (a != c) {
        parent[a] = c;
        --comps;
      }
    }
    return comps == 1;
  }

  /// Gaussian elimination with partial pivoting on the Laplacian with the
  /// last node grounded.
  std::vector<double> flows(int skip_line = -1) const {
    const int n = nodes - 1;
    std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t l = 0; l < from.size(); ++l) {
      if (from[l] < 0 || static_cast<int>(l) == skip_line) continue;
      const int i = from[l], j = to[l];
      if (i < n) a[i][i] += b[l];
      if (j < n) a[j][j] += b[l];
      if (i < n && j < n) {
        a[i][j] -= b[l];
        a[j][i] -= b[l];
      }
    }
    for (int i = 0; i < n; ++i) a[i][n] = p[i];
    for (int c = 0; c < n; ++c) {
      int piv = c;
      for (int r = c + 1; r < n; ++r)
        if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
      std::swap(a[c], a[piv]);
      for (int r = c + 1; r < n; ++r) {
        const double f = a[r][c] / a[c][c];
        for (int k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
      }
    }
    std::vector<double> theta(nodes, 0.0);
    for (int r = n - 1; r >= 0; --r) {
      double s = a[r][n];
      for (int k = r + 1; k < n; ++k) s -= a[r][k] * theta[k];
      theta[r] = s / a[r][r];
    }
    std::vector<double> f(from.size(), 0.0);
    for (std::size_t l = 0; l < from.size(); ++l)
      if (from[l] >= 0 && static_cast<int>(l) != skip_line) f[l] = b[l] * (theta[from[l]] - theta[to[l]]);
    return f;
  }
};

/// N-1 worst loading by re-solving every single online-line outage.
inline double exhaustive_n1(const Grid& grid, const TopologyConfig& t, const std::vector<double>& inj) {
  const DenseModel m(grid, t, inj);
  if (!m.connected()) return kIslandRho;
  double worst = 0.0;
  for (int k = 0; k < grid.line_count(); ++k) {
    if (m.from[k] < 0) continue;
    if (!m.connected(k)) {
      worst = std::max(worst, kIslandRho);
      continue;
    }
    const auto f = m.flows(k);
    for (int l = 0; l < grid.line_count(); ++l)
      if (l != k && m.from[l] >= 0) worst = std::max(worst, std::abs(f[l]) / grid.line(l).p_max);
  }
  return worst;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace testsupport
