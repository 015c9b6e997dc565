#pragma once

// Shared fixtures: seeded random graphs and an independent BFS oracle.

#include <deque>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mcff/mcff.hpp"

namespace testing_support {

using mcff::Link;
using mcff::Network;
using mcff::NodeId;

inline NodeId name(std::size_t i) {
  std::string s = std::to_string(i);
  return "n" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

/// Connected graph: random spanning tree plus extra links with probability p.
inline Network random_connected(std::mt19937_64& rng, std::size_t n, double p) {
  std::vector<NodeId> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back(name(i));
  std::vector<std::pair<NodeId, NodeId>> links;
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 1; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    links.emplace_back(nodes[perm[i]], nodes[perm[pick(rng)]]);
  }
  std::bernoulli_distribution extra(p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (extra(rng)) links.emplace_back(nodes[i], nodes[j]);
  return Network(nodes, links);
}

/// Plain adjacency-set BFS, deliberately sharing nothing with the library's
/// Dijkstra. Returns hop distances from src over links not in `removed`.
inline std::map<NodeId, std::size_t> bfs(const Network& g, const NodeId& src, const std::set<Link>& removed = {}) {
  std::map<NodeId, std::set<NodeId>> adj;
  for (const auto& l : g.links()) {
    if (removed.count(l)) continue;
    adj[l.a].insert(l.b);
    adj[l.b].insert(l.a);
  }
  std::map<NodeId, std::size_t> dist{{src, 0}};
  std::deque<NodeId> q{src};
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop_front();
    for (const auto& w : adj[u]) {
      if (dist.count(w)) continue;
      dist[w] = dist[u] + 1;
      q.push_back(w);
    }
  }
  return dist;
}

inline Network make(std::vector<NodeId> nodes, std::vector<std::pair<NodeId, NodeId>> links) {
  return Network(std::move(nodes), links);
}

inline Network triangle() { return make({"A", "B", "C"}, {{"A", "B"}, {"B", "C"}, {"A", "C"}}); }

/// Group state plus a fabric kept in sync through the installer.
struct Deployment {
  const Network& g;
  mcff::GroupState gs;
  mcff::Fabric fabric;
  mcff::FabricInstaller installer;

  Deployment(const Network& net, const NodeId& source, mcff::ProtectionConfig cfg, std::string key = "g0")
      : g(net), gs(std::move(key), source, std::move(cfg)), fabric(net), installer(fabric) {
    fabric.register_group(gs);
  }
  Deployment(const Deployment&) = delete;

  bool join(const NodeId& v) { return mcff::protect_join(gs, g, v, installer); }
  bool leave(const NodeId& v) { return mcff::protect_leave(gs, v, installer); }

  std::size_t flows() const {
    std::size_t s = 0;
    for (const auto& [n, sw] : fabric.switches()) s += sw.flow_count();
    return s;
  }
  std::size_t groups() const {
    std::size_t s = 0;
    for (const auto& [n, sw] : fabric.switches()) s += sw.group_count();
    return s;
  }
};

}  // namespace testing_support
