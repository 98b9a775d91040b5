#pragma once

// Static grid description, switching configurations and unitary actions.
//
// Line ends are addressed by a flat index: end 2*l is the `from` side of
// line l, end 2*l+1 its `to` side.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "gridplan/error.hpp"

namespace gridplan {

enum class Bus : std::uint8_t { A = 0, B = 1 };

enum class InjectionKind : std::uint8_t { Generator, Load };

struct Substation {
  int id = 0;
  std::string name;
  static constexpr int kBusCount = 2;
};

struct Line {
  int id = 0;
  int from = 0;
  int to = 0;
  double susceptance = 1.0;  // per-unit, 1/x
  double p_max = 1.0;        // MW
};

struct Injection {
  int id = 0;
  int substation = 0;
  InjectionKind kind = InjectionKind::Load;
  std::string name;
};

/// Unvalidated input to Grid construction. Ids are ignored; elements are
/// numbered in the order they appear.
struct GridDescription {
  std::string name;
  std::vector<Substation> substations;
  std::vector<Line> lines;
  std::vector<Injection> injections;
};

inline int line_of_end(int end) { return end / 2; }
inline int end_index(int line, bool to_side) { return 2 * line + (to_side ? 1 : 0); }

class Grid {
 public:
  /// Validates the description and assigns element indices in order.
  static Grid build(GridDescription desc) {
    Grid g;
    g.name_ = std::move(desc.name);
    g.substations_ = std::move(desc.substations);
    g.lines_ = std::move(desc.lines);
    g.injections_ = std::move(desc.injections);
    const int n_sub = static_cast<int>(g.substations_.size());
    if (n_sub == 0) throw ValidationError("grid has no substations");
    for (int s = 0; s < n_sub; ++s) {
      g.substations_[s].id = s;
      if (g.substations_[s].name.empty()) g.substations_[s].name = "S" + std::to_string(s);
    }
    for (int l = 0; l < static_cast<int>(g.lines_.size()); ++l) {
      Line& line = g.lines_[l];
      line.id = l;
      const std::string tag = "line " + std::to_string(l);
      if (line.from < 0 || line.from >= n_sub || line.to < 0 || line.to >= n_sub)
        throw ValidationError(tag + " references a missing substation");
      if (line.from == line.to) throw ValidationError(tag + " connects a substation to itself");
      if (!(line.susceptance > 0.0)) throw ValidationError(tag + " has non-positive susceptance");
      if (!(line.p_max > 0.0)) throw ValidationError(tag + " has non-positive thermal limit");
    }
    for (int k = 0; k < static_cast<int>(g.injections_.size()); ++k) {
      Injection& inj = g.injections_[k];
      inj.id = k;
      if (inj.substation < 0 || inj.substation >= n_sub)
        throw ValidationError("injection " + std::to_string(k) + " references a missing substation");
      if (inj.name.empty())
        inj.name = (inj.kind == InjectionKind::Generator ? "G" : "L") + std::to_string(k);
    }

    // Reference graph (all elements on bus A) must be connected.
    std::vector<int> parent(n_sub);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    int components = n_sub;
    for (const Line& line : g.lines_) {
      const int a = find(line.from), b = find(line.to);
      if (a != b) {
        parent[a] = b;
        --components;
      }
    }
    if (components != 1) throw ValidationError("reference graph is disconnected");

    g.ends_at_.assign(n_sub, {});
    g.injections_at_.assign(n_sub, {});
    for (const Line& line : g.lines_) {
      g.ends_at_[line.from].push_back(end_index(line.id, false));
      g.ends_at_[line.to].push_back(end_index(line.id, true));
    }
    for (auto& ends : g.ends_at_) std::sort(ends.begin(), ends.end());
    for (const Injection& inj : g.injections_) g.injections_at_[inj.substation].push_back(inj.id);
    g.fingerprint_ = g.compute_fingerprint();
    return g;
  }

  const std::string& name() const { return name_; }
  const std::vector<Substation>& substations() const { return substations_; }
  const std::vector<Line>& lines() const { return lines_; }
  const std::vector<Injection>& injections() const { return injections_; }
  int substation_count() const { return static_cast<int>(substations_.size()); }
  int line_count() const { return static_cast<int>(lines_.size()); }
  int injection_count() const { return static_cast<int>(injections_.size()); }
  const Line& line(int l) const { return lines_.at(l); }

  /// Line-end indices attached to substation `s`, ascending.
  const std::vector<int>& line_ends_at(int s) const { return ends_at_.at(s); }
  const std::vector<int>& injections_at(int s) const { return injections_at_.at(s); }
  int substation_of_end(int end) const {
    const Line& l = lines_.at(line_of_end(end));
    return (end % 2 == 0) ? l.from : l.to;
  }
  int degree(int s) const { return static_cast<int>(ends_at_.at(s).size()); }

  /// Content hash used to reject mixing configurations of different grids.
  std::uint64_t fingerprint() const { return fingerprint_; }

 private:
  std::uint64_t compute_fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffU;
        h *= 1099511628211ULL;
      }
    };
    mix(substations_.size());
    for (const Line& l : lines_) {
      mix(static_cast<std::uint64_t>(l.from));
      mix(static_cast<std::uint64_t>(l.to));
    }
    for (const Injection& i : injections_) {
      mix(static_cast<std::uint64_t>(i.substation));
      mix(static_cast<std::uint64_t>(i.kind));
    }
    return h;
  }

  std::string name_;
  std::vector<Substation> substations_;
  std::vector<Line> lines_;
  std::vector<Injection> injections_;
  std::vector<std::vector<int>> ends_at_;
  std::vector<std::vector<int>> injections_at_;
  std::uint64_t fingerprint_ = 0;
};

/// Bus assignment of every element at one substation, ordered like
/// Grid::line_ends_at and Grid::injections_at.
struct LocalConfig {
  std::vector<Bus> line_ends;
  std::vector<Bus> injections;

  bool is_reference() const {
    return std::all_of(line_ends.begin(), line_ends.end(), [](Bus b) { return b == Bus::A; }) &&
           std::all_of(injections.begin(), injections.end(), [](Bus b) { return b == Bus::A; });
  }
  friend bool operator==(const LocalConfig&, const LocalConfig&) = default;
  friend auto operator<=>(const LocalConfig&, const LocalConfig&) = default;
};

/// Full switching state of a grid.
class TopologyConfig {
 public:
  TopologyConfig() = default;

  /// Every element on bus A, every line online.
  static TopologyConfig reference(const Grid& grid) {
    TopologyConfig t;
    t.grid_ = grid.fingerprint();
    t.branch_.assign(2 * grid.line_count(), Bus::A);
    t.injection_.assign(grid.injection_count(), Bus::A);
    t.online_.assign(grid.line_count(), 1);
    return t;
  }

  std::uint64_t grid_fingerprint() const { return grid_; }
  Bus end_bus(int end) const { return branch_.at(end); }
  Bus injection_bus(int inj) const { return injection_.at(inj); }
  bool line_online(int l) const { return online_.at(l) != 0; }
  const std::vector<Bus>& branch_assignment() const { return branch_; }
  const std::vector<Bus>& injection_assignment() const { return injection_; }

  void set_end_bus(int end, Bus b) { branch_.at(end) = b; }
  void set_injection_bus(int inj, Bus b) { injection_.at(inj) = b; }
  void set_line_online(int l, bool on) { online_.at(l) = on ? 1 : 0; }

  LocalConfig local(const Grid& grid, int s) const {
    LocalConfig c;
    for (int e : grid.line_ends_at(s)) c.line_ends.push_back(branch_[e]);
    for (int k : grid.injections_at(s)) c.injections.push_back(injection_[k]);
    return c;
  }
  void set_local(const Grid& grid, int s, const LocalConfig& c) {
    const auto& ends = grid.line_ends_at(s);
    const auto& injs = grid.injections_at(s);
    if (c.line_ends.size() != ends.size() || c.injections.size() != injs.size())
      throw ValidationError("local configuration size mismatch at substation " + std::to_string(s));
    for (std::size_t i = 0; i < ends.size(); ++i) branch_[ends[i]] = c.line_ends[i];
    for (std::size_t i = 0; i < injs.size(); ++i) injection_[injs[i]] = c.injections[i];
  }

  /// Stable hash of the switching state.
  std::uint64_t hash() const {
    std::uint64_t h = grid_ ^ 0x9e3779b97f4a7c15ULL;
    auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 0x100000001b3ULL + (h >> 29); };
    for (Bus b : branch_) mix(static_cast<std::uint64_t>(b));
    for (Bus b : injection_) mix(static_cast<std::uint64_t>(b) + 2);
    for (auto o : online_) mix(static_cast<std::uint64_t>(o) + 4);
    return h;
  }

  friend bool operator==(const TopologyConfig&, const TopologyConfig&) = default;

 private:
  std::uint64_t grid_ = 0;
  std::vector<Bus> branch_;
  std::vector<Bus> injection_;
  std::vector<std::uint8_t> online_;
};

struct TopologyHash {
  std::size_t operator()(const TopologyConfig& t) const { return static_cast<std::size_t>(t.hash()); }
};

/// Reassigns every element of one substation.
struct SubstationAction {
  int substation = 0;
  LocalConfig target;
  friend bool operator==(const SubstationAction&, const SubstationAction&) = default;
  friend auto operator<=>(const SubstationAction&, const SubstationAction&) = default;
};

/// Switches a single line on or off.
struct LineStatusAction {
  int line = 0;
  bool online = false;
  friend bool operator==(const LineStatusAction&, const LineStatusAction&) = default;
  friend auto operator<=>(const LineStatusAction&, const LineStatusAction&) = default;
};

using UnitaryAction = std::variant<SubstationAction, LineStatusAction>;

inline UnitaryAction disable_line(int line) { return LineStatusAction{line, false}; }

namespace detail {

inline void check_same_grid(const Grid& grid, const TopologyConfig& t) {
  if (t.grid_fingerprint() != grid.fingerprint()) throw GridMismatchError();
}

/// Throws when an injection at `s` sits on a bus that has no online line end.
inline void check_not_stranded(const Grid& grid, const TopologyConfig& t, int s) {
  bool has_line[2] = {false, false};
  for (int e : grid.line_ends_at(s))
    if (t.line_online(line_of_end(e))) has_line[static_cast<int>(t.end_bus(e))] = true;
  for (int k : grid.injections_at(s)) {
    if (!has_line[static_cast<int>(t.injection_bus(k))])
      throw InfeasibleConfigError("injection " + std::to_string(k) + " stranded on a lineless bus at substation " +
                                  std::to_string(s));
  }
}

}  // namespace detail

/// Returns `topo` with one substation (or one line status) changed.
inline TopologyConfig apply_unitary_action(const Grid& grid, const TopologyConfig& topo,
                                           const UnitaryAction& action) {
  detail::check_same_grid(grid, topo);
  TopologyConfig out = topo;
  if (const auto* sa = std::get_if<SubstationAction>(&action)) {
    if (sa->substation < 0 || sa->substation >= grid.substation_count())
      throw ValidationError("unknown substation " + std::to_string(sa->substation));
    out.set_local(grid, sa->substation, sa->target);
    detail::check_not_stranded(grid, out, sa->substation);
  } else {
    const auto& la = std::get<LineStatusAction>(action);
    if (la.line < 0 || la.line >= grid.line_count())
      throw ValidationError("unknown line " + std::to_string(la.line));
    out.set_line_online(la.line, la.online);
    detail::check_not_stranded(grid, out, grid.line(la.line).from);
    detail::check_not_stranded(grid, out, grid.line(la.line).to);
  }
  return out;
}

namespace detail {

inline bool local_differs(const Grid& grid, const TopologyConfig& a, const TopologyConfig& b, int s) {
  for (int e : grid.line_ends_at(s))
    if (a.end_bus(e) != b.end_bus(e)) return true;
  for (int k : grid.injections_at(s))
    if (a.injection_bus(k) != b.injection_bus(k)) return true;
  return false;
}

inline bool local_is_reference(const Grid& grid, const TopologyConfig& t, int s) {
  for (int e : grid.line_ends_at(s))
    if (t.end_bus(e) != Bus::A) return false;
  for (int k : grid.injections_at(s))
    if (t.injection_bus(k) != Bus::A) return false;
  return true;
}

}  // namespace detail

/// Substations deviating from all-bus-A plus offline lines.
inline int topological_depth(const Grid& grid, const TopologyConfig& topo) {
  detail::check_same_grid(grid, topo);
  int depth = 0;
  for (int s = 0; s < grid.substation_count(); ++s)
    if (!detail::local_is_reference(grid, topo, s)) ++depth;
  for (int l = 0; l < grid.line_count(); ++l)
    if (!topo.line_online(l)) ++depth;
  return depth;
}

/// Substations with differing local assignment plus lines with differing status.
inline int topology_distance(const Grid& grid, const TopologyConfig& a, const TopologyConfig& b) {
  detail::check_same_grid(grid, a);
  detail::check_same_grid(grid, b);
  int d = 0;
  for (int s = 0; s < grid.substation_count(); ++s)
    if (detail::local_differs(grid, a, b, s)) ++d;
  for (int l = 0; l < grid.line_count(); ++l)
    if (a.line_online(l) != b.line_online(l)) ++d;
  return d;
}

/// Unitary actions that transform `current` into `target`. Line re-enables
/// come first, then substations in ascending index, then line disables, so
/// that no intermediate configuration strands an injection.
inline std::vector<UnitaryAction> decompose_target(const Grid& grid, const TopologyConfig& current,
                                                   const TopologyConfig& target) {
  detail::check_same_grid(grid, current);
  detail::check_same_grid(grid, target);
  std::vector<UnitaryAction> seq;
  for (int l = 0; l < grid.line_count(); ++l)
    if (!current.line_online(l) && target.line_online(l)) seq.emplace_back(LineStatusAction{l, true});
  for (int s = 0; s < grid.substation_count(); ++s)
    if (detail::local_differs(grid, current, target, s)) seq.emplace_back(SubstationAction{s, target.local(grid, s)});
  for (int l = 0; l < grid.line_count(); ++l)
    if (current.line_online(l) && !target.line_online(l)) seq.emplace_back(LineStatusAction{l, false});
  return seq;
}

}  // namespace gridplan
