#pragma once

// Grid description document (JSON):
//
//   {
//     "format_version": 1,
//     "name": "desk14",
//     "substations": [{"name": "S0"}, ...],
//     "lines": [{"from": 0, "to": 1, "susceptance": 10.0, "p_max": 120.0}, ...],
//     "injections": [{"substation": 0, "kind": "generator", "name": "G0"}, ...]
//   }
//
// Topology configurations serialise as
//   {"branch": "AABA...", "injection": "AB...", "offline": [3, 7]}

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "gridplan/error.hpp"
#include "gridplan/grid.hpp"

namespace gridplan {

inline constexpr int kGridFormatVersion = 1;

using json = nlohmann::json;

inline Grid build_grid(const json& doc) {
  try {
    if (!doc.is_object()) throw ValidationError("grid document must be an object");
    const int version = doc.at("format_version").get<int>();
    if (version != kGridFormatVersion)
      throw ValidationError("unsupported grid format_version " + std::to_string(version));
    GridDescription desc;
    desc.name = doc.value("name", std::string{});
    for (const auto& s : doc.at("substations")) desc.substations.push_back({0, s.value("name", std::string{})});
    for (const auto& l : doc.at("lines")) {
      Line line;
      line.from = l.at("from").get<int>();
      line.to = l.at("to").get<int>();
      line.susceptance = l.at("susceptance").get<double>();
      line.p_max = l.at("p_max").get<double>();
      desc.lines.push_back(line);
    }
    for (const auto& i : doc.at("injections")) {
      Injection inj;
      inj.substation = i.at("substation").get<int>();
      const auto kind = i.at("kind").get<std::string>();
      if (kind == "generator")
        inj.kind = InjectionKind::Generator;
      else if (kind == "load")
        inj.kind = InjectionKind::Load;
      else
        throw ValidationError("unknown injection kind '" + kind + "'");
      inj.name = i.value("name", std::string{});
      desc.injections.push_back(inj);
    }
    return Grid::build(std::move(desc));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("grid document: ") + e.what());
  }
}

inline Grid build_grid(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("grid document does not parse: ") + e.what());
  }
  return build_grid(doc);
}

inline json grid_to_json(const Grid& grid) {
  json doc;
  doc["format_version"] = kGridFormatVersion;
  doc["name"] = grid.name();
  doc["substations"] = json::array();
  for (const auto& s : grid.substations()) doc["substations"].push_back({{"name", s.name}});
  doc["lines"] = json::array();
  for (const auto& l : grid.lines())
    doc["lines"].push_back({{"from", l.from}, {"to", l.to}, {"susceptance", l.susceptance}, {"p_max", l.p_max}});
  doc["injections"] = json::array();
  for (const auto& i : grid.injections())
    doc["injections"].push_back({{"substation", i.substation},
                                 {"kind", i.kind == InjectionKind::Generator ? "generator" : "load"},
                                 {"name", i.name}});
  return doc;
}

inline Grid load_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open grid file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return build_grid(ss.str());
}

inline json topology_to_json(const Grid& grid, const TopologyConfig& topo) {
  std::string branch, inj;
  for (Bus b : topo.branch_assignment()) branch.push_back(b == Bus::A ? 'A' : 'B');
  for (Bus b : topo.injection_assignment()) inj.push_back(b == Bus::A ? 'A' : 'B');
  json offline = json::array();
  for (int l = 0; l < grid.line_count(); ++l)
    if (!topo.line_online(l)) offline.push_back(l);
  return {{"branch", branch}, {"injection", inj}, {"offline", offline}};
}

inline TopologyConfig topology_from_json(const Grid& grid, const json& j) {
  TopologyConfig t = TopologyConfig::reference(grid);
  try {
    const auto branch = j.at("branch").get<std::string>();
    const auto inj = j.at("injection").get<std::string>();
    if (static_cast<int>(branch.size()) != 2 * grid.line_count() ||
        static_cast<int>(inj.size()) != grid.injection_count())
      throw ValidationError("topology does not match the grid");
    auto bus = [](char c) {
      if (c == 'A') return Bus::A;
      if (c == 'B') return Bus::B;
      throw ValidationError(std::string("bad bus label '") + c + "'");
    };
    for (std::size_t e = 0; e < branch.size(); ++e) t.set_end_bus(static_cast<int>(e), bus(branch[e]));
    for (std::size_t k = 0; k < inj.size(); ++k) t.set_injection_bus(static_cast<int>(k), bus(inj[k]));
    for (const auto& l : j.value("offline", json::array())) {
      const int line = l.get<int>();
      if (line < 0 || line >= grid.line_count()) throw ValidationError("offline line out of range");
      t.set_line_online(line, false);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("topology document: ") + e.what());
  }
  return t;
}

}  // namespace gridplan
