#pragma once

// DC power flow, PTDF/LODF sensitivities and N-1 contingency screening.
//
// Electrical buses: the two buses of a substation are distinct nodes only
// when both carry at least one online line end; otherwise they collapse to
// one node. The slack is the lowest-index node.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "gridplan/error.hpp"
#include "gridplan/grid.hpp"

namespace gridplan {

/// Loading assigned to any outage that splits the grid.
inline constexpr double kIslandRho = 10.0;
/// Stored on the LODF diagonal (self-outage).
inline constexpr double kLodfSelfOutage = -1.0;

/// Mapping from grid elements to electrical nodes for one topology.
struct ElectricalNetwork {
  int node_count = 0;
  std::vector<std::array<int, 2>> bus_node;  // per substation, node of bus A / B (-1 if none)
  std::vector<int> node_substation;
  std::vector<int> from_node;  // per line, -1 when offline
  std::vector<int> to_node;
  std::vector<bool> online;

  int injection_node(const Grid& grid, const TopologyConfig& topo, int inj) const {
    const int s = grid.injections()[inj].substation;
    return bus_node[s][static_cast<int>(topo.injection_bus(inj))];
  }

  /// Connected components over nodes, each sorted ascending.
  std::vector<std::vector<int>> components() const {
    std::vector<int> parent(node_count);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (std::size_t l = 0; l < online.size(); ++l)
      if (online[l]) parent[find(from_node[l])] = find(to_node[l]);
    std::vector<int> root_index(node_count, -1);
    std::vector<std::vector<int>> comps;
    for (int n = 0; n < node_count; ++n) {
      const int r = find(n);
      if (root_index[r] < 0) {
        root_index[r] = static_cast<int>(comps.size());
        comps.emplace_back();
      }
      comps[root_index[r]].push_back(n);
    }
    return comps;
  }
};

inline ElectricalNetwork build_network(const Grid& grid, const TopologyConfig& topo) {
  detail::check_same_grid(grid, topo);
  ElectricalNetwork net;
  const int n_sub = grid.substation_count();
  net.bus_node.assign(n_sub, {-1, -1});
  for (int s = 0; s < n_sub; ++s) {
    bool has_line[2] = {false, false};
    for (int e : grid.line_ends_at(s))
      if (topo.line_online(line_of_end(e))) has_line[static_cast<int>(topo.end_bus(e))] = true;
    if (has_line[0] && has_line[1]) {
      net.bus_node[s] = {net.node_count, net.node_count + 1};
      net.node_substation.push_back(s);
      net.node_substation.push_back(s);
      net.node_count += 2;
    } else if (has_line[0] || has_line[1] || !grid.injections_at(s).empty()) {
      net.bus_node[s] = {net.node_count, net.node_count};
      net.node_substation.push_back(s);
      net.node_count += 1;
    }
  }
  const int n_line = grid.line_count();
  net.from_node.assign(n_line, -1);
  net.to_node.assign(n_line, -1);
  net.online.assign(n_line, false);
  for (int l = 0; l < n_line; ++l) {
    if (!topo.line_online(l)) continue;
    const Line& line = grid.line(l);
    net.online[l] = true;
    net.from_node[l] = net.bus_node[line.from][static_cast<int>(topo.end_bus(end_index(l, false)))];
    net.to_node[l] = net.bus_node[line.to][static_cast<int>(topo.end_bus(end_index(l, true)))];
  }
  return net;
}

/// True when the online electrical graph of `topo` forms a single component.
inline bool is_connected(const Grid& grid, const TopologyConfig& topo) {
  return build_network(grid, topo).components().size() == 1;
}

struct FlowSolution {
  ElectricalNetwork network;
  std::vector<double> angles;          // per node, radians (slack = 0)
  std::vector<double> node_injection;  // per node, MW
  std::vector<double> flows;           // per line, MW from -> to (0 when offline)
  std::vector<double> loadings;        // per line, |flow| / p_max (0 when offline)
};

struct LineLoading {
  int line = 0;
  double rho = 0.0;
};

/// Per-line loading of online lines.
inline std::vector<LineLoading> line_loadings(const Grid& grid, const FlowSolution& sol) {
  std::vector<LineLoading> out;
  for (int l = 0; l < grid.line_count(); ++l)
    if (sol.network.online[l]) out.push_back({l, std::abs(sol.flows[l]) / grid.line(l).p_max});
  return out;
}

namespace detail {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Factorization = Eigen::SimplicialLDLT<SparseMatrix>;

inline void check_connected(const ElectricalNetwork& net) {
  auto comps = net.components();
  if (comps.size() != 1) throw IslandingError(std::move(comps));
}

inline std::vector<double> node_injections(const Grid& grid, const TopologyConfig& topo,
                                           const ElectricalNetwork& net, std::span<const double> injections) {
  if (static_cast<int>(injections.size()) != grid.injection_count())
    throw ValidationError("injection vector length does not match the grid");
  std::vector<double> p(net.node_count, 0.0);
  double sum = 0.0, scale = 1.0;
  for (int k = 0; k < grid.injection_count(); ++k) {
    p[net.injection_node(grid, topo, k)] += injections[k];
    sum += injections[k];
    scale += std::abs(injections[k]);
  }
  if (std::abs(sum) > 1e-6 * scale) throw ValidationError("injections are not balanced");
  return p;
}

/// Susceptance matrix with the slack row and column removed (slack = node 0).
inline SparseMatrix reduced_susceptance(const Grid& grid, const ElectricalNetwork& net) {
  const int n = net.node_count - 1;
  std::vector<Eigen::Triplet<double>> trips;
  auto add = [&](int r, int c, double v) {
    if (r > 0 && c > 0) trips.emplace_back(r - 1, c - 1, v);
  };
  for (int l = 0; l < grid.line_count(); ++l) {
    if (!net.online[l]) continue;
    const double b = grid.line(l).susceptance;
    const int f = net.from_node[l], t = net.to_node[l];
    add(f, f, b);
    add(t, t, b);
    add(f, t, -b);
    add(t, f, -b);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

inline void factorize(Factorization& solver, const SparseMatrix& m) {
  solver.compute(m);
  if (solver.info() != Eigen::Success) throw SingularSystemError("reduced susceptance matrix is singular");
}

}  // namespace detail

/// Solves B*theta = P with the slack angle fixed at zero.
inline FlowSolution solve_dc(const Grid& grid, const TopologyConfig& topo, std::span<const double> injections) {
  FlowSolution sol;
  sol.network = build_network(grid, topo);
  const ElectricalNetwork& net = sol.network;
  detail::check_connected(net);
  sol.node_injection = detail::node_injections(grid, topo, net, injections);
  sol.angles.assign(net.node_count, 0.0);
  if (net.node_count > 1) {
    detail::Factorization solver;
    detail::factorize(solver, detail::reduced_susceptance(grid, net));
    Eigen::VectorXd rhs(net.node_count - 1);
    for (int n = 1; n < net.node_count; ++n) rhs[n - 1] = sol.node_injection[n];
    const Eigen::VectorXd theta = solver.solve(rhs);
    if (solver.info() != Eigen::Success) throw SingularSystemError("DC solve failed");
    for (int n = 1; n < net.node_count; ++n) sol.angles[n] = theta[n - 1];
  }
  sol.flows.assign(grid.line_count(), 0.0);
  sol.loadings.assign(grid.line_count(), 0.0);
  for (int l = 0; l < grid.line_count(); ++l) {
    if (!net.online[l]) continue;
    sol.flows[l] = grid.line(l).susceptance * (sol.angles[net.from_node[l]] - sol.angles[net.to_node[l]]);
    sol.loadings[l] = std::abs(sol.flows[l]) / grid.line(l).p_max;
  }
  return sol;
}

/// PTDF (line x node) and, once filled, LODF (line x line) for one topology.
struct SensitivityFactors {
  ElectricalNetwork network;
  int slack = 0;
  Eigen::MatrixXd ptdf;
  Eigen::MatrixXd lodf;     // empty until compute_lodf
  std::vector<bool> bridge;  // per line; only meaningful once LODF is filled

  bool has_lodf() const { return lodf.size() > 0; }
};

inline SensitivityFactors compute_ptdf(const Grid& grid, const TopologyConfig& topo) {
  SensitivityFactors f;
  f.network = build_network(grid, topo);
  const ElectricalNetwork& net = f.network;
  detail::check_connected(net);
  const int n_line = grid.line_count();
  f.ptdf = Eigen::MatrixXd::Zero(n_line, net.node_count);
  if (net.node_count > 1) {
    detail::Factorization solver;
    detail::factorize(solver, detail::reduced_susceptance(grid, net));
    // Solve B_r Z = A_r^T diag(b); PTDF(l, n) = Z(n, l).
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(net.node_count - 1, n_line);
    for (int l = 0; l < n_line; ++l) {
      if (!net.online[l]) continue;
      const double b = grid.line(l).susceptance;
      if (net.from_node[l] > 0) rhs(net.from_node[l] - 1, l) += b;
      if (net.to_node[l] > 0) rhs(net.to_node[l] - 1, l) -= b;
    }
    const Eigen::MatrixXd z = solver.solve(rhs);
    if (solver.info() != Eigen::Success) throw SingularSystemError("PTDF solve failed");
    for (int l = 0; l < n_line; ++l) {
      if (!net.online[l]) continue;
      for (int n = 1; n < net.node_count; ++n) f.ptdf(l, n) = z(n - 1, l);
    }
  }
  return f;
}

inline SensitivityFactors compute_lodf(SensitivityFactors f) {
  const auto& net = f.network;
  const int n_line = static_cast<int>(f.ptdf.rows());
  f.lodf = Eigen::MatrixXd::Zero(n_line, n_line);
  f.bridge.assign(n_line, false);
  for (int k = 0; k < n_line; ++k) {
    if (!net.online[k]) continue;
    const int a = net.from_node[k], b = net.to_node[k];
    const double own = f.ptdf(k, a) - f.ptdf(k, b);
    const double denom = 1.0 - own;
    if (std::abs(denom) < 1e-9) {
      f.bridge[k] = true;
      continue;
    }
    for (int l = 0; l < n_line; ++l) {
      if (!net.online[l]) continue;
      f.lodf(l, k) = (l == k) ? kLodfSelfOutage : (f.ptdf(l, a) - f.ptdf(l, b)) / denom;
    }
  }
  return f;
}

struct ContingencyReport {
  std::vector<double> outage_worst;  // per line outage, worst loading (0 when offline)
  double max_rho = 0.0;
  int worst_outage = -1;
  int worst_line = -1;  // -1 when the worst outage islands the grid
  std::vector<int> islanding_outages;
};

/// Reusable N-1 screener for a fixed branch topology. Injection bus
/// assignments are read from the configuration passed to each call so that
/// injection placement can vary without refactoring.
class ContingencyScreener {
 public:
  ContingencyScreener(const Grid& grid, const TopologyConfig& topo)
      : grid_(&grid), factors_(compute_lodf(compute_ptdf(grid, topo))) {}

  const SensitivityFactors& factors() const { return factors_; }

  /// Base-case line flows via PTDF.
  std::vector<double> flows(const TopologyConfig& topo, std::span<const double> injections) const {
    const auto p = detail::node_injections(*grid_, topo, factors_.network, injections);
    std::vector<double> f(grid_->line_count(), 0.0);
    for (int l = 0; l < grid_->line_count(); ++l) {
      if (!factors_.network.online[l]) continue;
      double acc = 0.0;
      for (int n = 1; n < factors_.network.node_count; ++n) acc += factors_.ptdf(l, n) * p[n];
      f[l] = acc;
    }
    return f;
  }

  ContingencyReport screen(const TopologyConfig& topo, std::span<const double> injections) const {
    const auto f = flows(topo, injections);
    const int n_line = grid_->line_count();
    const auto& online = factors_.network.online;
    ContingencyReport rep;
    rep.outage_worst.assign(n_line, 0.0);
    for (int k = 0; k < n_line; ++k) {
      if (!online[k]) continue;
      double worst = 0.0;
      int worst_line = -1;
      if (factors_.bridge[k]) {
        worst = kIslandRho;
        rep.islanding_outages.push_back(k);
      } else {
        for (int l = 0; l < n_line; ++l) {
          if (l == k || !online[l]) continue;
          const double rho = std::abs(f[l] + factors_.lodf(l, k) * f[k]) / grid_->line(l).p_max;
          if (rho > worst) {
            worst = rho;
            worst_line = l;
          }
        }
      }
      rep.outage_worst[k] = worst;
      if (rep.worst_outage < 0 || worst > rep.max_rho) {
        rep.max_rho = worst;
        rep.worst_outage = k;
        rep.worst_line = worst_line;
      }
    }
    return rep;
  }

  /// Worst post-outage loading seen by each monitored line (feature input).
  std::vector<double> line_worst_loading(const TopologyConfig& topo, std::span<const double> injections) const {
    const auto f = flows(topo, injections);
    const int n_line = grid_->line_count();
    const auto& online = factors_.network.online;
    std::vector<double> worst(n_line, 0.0);
    for (int l = 0; l < n_line; ++l)
      if (online[l]) worst[l] = std::abs(f[l]) / grid_->line(l).p_max;
    for (int k = 0; k < n_line; ++k) {
      if (!online[k] || factors_.bridge[k]) continue;
      for (int l = 0; l < n_line; ++l) {
        if (l == k || !online[l]) continue;
        worst[l] = std::max(worst[l], std::abs(f[l] + factors_.lodf(l, k) * f[k]) / grid_->line(l).p_max);
      }
    }
    return worst;
  }

 private:
  const Grid* grid_;
  SensitivityFactors factors_;
};

/// Worst loading over every single online-line outage.
inline ContingencyReport max_rho_n1(const Grid& grid, const TopologyConfig& topo, std::span<const double> injections) {
  return ContingencyScreener(grid, topo).screen(topo, injections);
}

/// Tab-separated flow/loading dump for debugging.
inline void write_flow_table(std::ostream& os, const Grid& grid, const FlowSolution& sol) {
  os << "line\tfrom\tto\tonline\tflow_mw\tp_max\trho\n";
  for (int l = 0; l < grid.line_count(); ++l) {
    const Line& line = grid.line(l);
    os << l << '\t' << line.from << '\t' << line.to << '\t' << (sol.network.online[l] ? 1 : 0) << '\t'
       << sol.flows[l] << '\t' << line.p_max << '\t' << sol.loadings[l] << '\n';
  }
}

}  // namespace gridplan
