#pragma once

// Topology documents ({"nodes": [...], "links": [[a, b], ...]}) and bundled presets.

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "netgraph.hpp"

namespace mcff {

inline Network load_topology(const nlohmann::json& doc) {
  if (!doc.is_object()) throw TopologyError("topology document must be an object");
  if (!doc.contains("nodes") || !doc["nodes"].is_array())
    throw TopologyError("topology document needs a 'nodes' array");
  if (!doc.contains("links") || !doc["links"].is_array())
    throw TopologyError("topology document needs a 'links' array");

  std::vector<NodeId> nodes;
  std::set<NodeId> seen;
  for (const auto& n : doc["nodes"]) {
    if (!n.is_string()) throw TopologyError("node ids must be strings");
    if (!seen.insert(n.get<std::string>()).second)
      throw TopologyError("duplicate node id '" + n.get<std::string>() + "'");
    nodes.emplace_back(n.get<std::string>());
  }
  std::vector<std::pair<NodeId, NodeId>> links;
  for (const auto& l : doc["links"]) {
    if (!l.is_array() || l.size() != 2 || !l[0].is_string() || !l[1].is_string())
      throw TopologyError("each link must be a pair of node ids");
    links.emplace_back(l[0].get<std::string>(), l[1].get<std::string>());
  }
  return Network(std::move(nodes), links);
}

inline Network parse_topology(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw TopologyError(std::string("malformed topology document: ") + e.what());
  }
  return load_topology(doc);
}

inline Network load_topology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TopologyError("cannot open topology file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_topology(ss.str());
}

inline nlohmann::json to_json(const Network& g) {
  nlohmann::json doc;
  doc["nodes"] = nlohmann::json::array();
  for (const auto& n : g.nodes()) doc["nodes"].push_back(n.str());
  doc["links"] = nlohmann::json::array();
  for (const auto& l : g.links()) doc["links"].push_back({l.a.str(), l.b.str()});
  return doc;
}

// Best-effort approximation of the GEANT pan-European backbone (about 2015),
// one switch per point of presence. The two Ireland-UK links are listed twice
// on purpose and collapse to one at load time. Same content as data/geant.json.
inline constexpr std::string_view kGeantDocument = R"({
  "nodes": ["AT", "BE", "BG", "CH", "CY", "CZ", "DE", "DE2", "DK", "EE", "ES",
            "FR", "FR2", "GR", "HR", "HU", "IE", "IL", "IS", "IT", "LT", "LU",
            "LV", "MT", "NL", "PL", "PT", "RO", "SE", "SI", "SK", "TR", "UK"],
  "links": [
    ["AT", "CH"], ["AT", "CZ"], ["AT", "DE"], ["AT", "HR"], ["AT", "HU"],
    ["AT", "IL"], ["AT", "IT"], ["AT", "SI"], ["AT", "SK"],
    ["BE", "FR"], ["BE", "LU"], ["BE", "NL"], ["BE", "UK"],
    ["BG", "GR"], ["BG", "RO"], ["BG", "TR"],
    ["CH", "DE"], ["CH", "FR"], ["CH", "FR2"], ["CH", "IT"],
    ["CY", "GR"], ["CY", "IL"], ["CY", "IT"],
    ["CZ", "DE"], ["CZ", "PL"], ["CZ", "SK"],
    ["DE", "DE2"], ["DE", "FR"], ["DE", "LU"], ["DE", "NL"], ["DE", "PL"],
    ["DE2", "DK"], ["DE2", "NL"], ["DE2", "SE"],
    ["DK", "IS"], ["DK", "NL"], ["DK", "SE"],
    ["EE", "LV"], ["EE", "SE"],
    ["ES", "FR"], ["ES", "FR2"], ["ES", "PT"],
    ["FR", "FR2"], ["FR", "LU"], ["FR", "UK"],
    ["FR2", "IT"],
    ["GR", "IT"], ["GR", "TR"],
    ["HR", "HU"], ["HR", "SI"],
    ["HU", "RO"], ["HU", "SK"],
    ["IE", "UK"], ["IE", "UK"],
    ["IL", "IT"],
    ["IS", "UK"],
    ["IT", "MT"], ["IT", "SI"],
    ["LT", "LV"], ["LT", "PL"],
    ["NL", "UK"],
    ["PT", "UK"],
    ["RO", "TR"]
  ]
})";

inline Network geant_topology() { return parse_topology(kGeantDocument); }

inline const NodeId& geant_source() {
  static const NodeId at("AT");
  return at;
}

}  // namespace mcff
