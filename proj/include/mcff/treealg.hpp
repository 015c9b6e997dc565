#pragma once

// Multicast trees and the SPT / DST join strategies.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "netgraph.hpp"

namespace mcff {

/// VLAN tag of a tree. 0 marks the untagged primary tree.
using Tag = std::uint32_t;

class TreeError : public Error {
public:
  using Error::Error;
};

/// Ordered directed edges leading from a node already in a tree to a new
/// subscriber. Consecutive edges chain head to tail.
struct Path {
  std::vector<DirectedEdge> edges;

  bool empty() const noexcept { return edges.empty(); }
  std::size_t size() const noexcept { return edges.size(); }
  const NodeId& head() const { return edges.back().to; }
  const NodeId& tail() const { return edges.front().from; }

  static Path from_nodes(const std::vector<NodeId>& nodes) {
    Path p;
    for (std::size_t i = 1; i < nodes.size(); ++i) p.edges.push_back({nodes[i - 1], nodes[i]});
    return p;
  }

  friend bool operator==(const Path&, const Path&) = default;
};

inline std::string to_string(const Path& p) {
  if (p.empty()) return "[]";
  std::string s = p.tail().str();
  for (const auto& e : p.edges) s += ">" + e.to.str();
  return s;
}

/// Rooted arborescence with the bookkeeping needed for protection: which
/// nodes are subscribers (terminals), which edges own a backup tree (by tag)
/// and which subscribers could not be given a backup path for an edge.
class MulticastTree {
public:
  MulticastTree() = default;
  MulticastTree(NodeId root, Tag tag = 0, std::size_t depth = 0) : root_(std::move(root)), tag_(tag), depth_(depth) {
    nodes_.insert(root_);
  }

  const NodeId& root() const noexcept { return root_; }
  Tag tag() const noexcept { return tag_; }
  /// Number of links assumed down on the way to this tree (0 for the primary).
  std::size_t depth() const noexcept { return depth_; }

  const std::set<NodeId>& nodes() const noexcept { return nodes_; }
  bool contains(const NodeId& n) const { return nodes_.count(n) != 0; }
  std::size_t edge_count() const noexcept { return parent_.size(); }

  std::vector<DirectedEdge> edges() const {
    std::vector<DirectedEdge> out;
    for (const auto& [child, parent] : parent_) out.push_back({parent, child});
    std::sort(out.begin(), out.end());
    return out;
  }

  bool has_edge(const DirectedEdge& e) const {
    auto it = parent_.find(e.to);
    return it != parent_.end() && it->second == e.from;
  }

  /// True if the undirected link is used by some tree edge.
  bool uses_link(const Link& l) const { return has_edge({l.a, l.b}) || has_edge({l.b, l.a}); }

  std::optional<NodeId> parent(const NodeId& n) const {
    auto it = parent_.find(n);
    if (it == parent_.end()) return std::nullopt;
    return it->second;
  }

  const std::set<NodeId>& children(const NodeId& n) const {
    static const std::set<NodeId> none;
    auto it = children_.find(n);
    return it == children_.end() ? none : it->second;
  }

  std::size_t outdegree(const NodeId& n) const { return children(n).size(); }

  const std::set<NodeId>& terminals() const noexcept { return terminals_; }
  bool is_terminal(const NodeId& n) const { return terminals_.count(n) != 0; }

  /// Edges from the root down to n; empty for the root, nullopt if n is not in the tree.
  std::optional<Path> route_to(const NodeId& n) const {
    if (!contains(n)) return std::nullopt;
    Path p;
    NodeId cur = n;
    while (cur != root_) {
      const NodeId& up = parent_.at(cur);
      p.edges.push_back({up, cur});
      cur = up;
    }
    std::reverse(p.edges.begin(), p.edges.end());
    return p;
  }

  std::size_t hops_to(const NodeId& n) const {
    auto r = route_to(n);
    if (!r) throw TreeError("node '" + n.str() + "' is not in the tree");
    return r->size();
  }

  /// Adds the path's edges; edges already present are skipped.
  void add_path(const Path& p) {
    if (p.empty()) return;
    if (!contains(p.tail())) throw TreeError("path " + to_string(p) + " does not start inside the tree");
    for (std::size_t i = 0; i < p.edges.size(); ++i) {
      const auto& e = p.edges[i];
      if (i > 0 && p.edges[i - 1].to != e.from) throw TreeError("path " + to_string(p) + " is not chained");
      if (e.from == e.to) throw TreeError("self-loop edge in path " + to_string(p));
    }
    // Validate fully before mutating so a bad path leaves the tree untouched.
    std::set<NodeId> added;
    for (const auto& e : p.edges) {
      if (has_edge(e)) continue;
      if (e.to == root_ || contains(e.to) || added.count(e.to))
        throw TreeError("edge " + to_string(e) + " would give '" + e.to.str() + "' a second parent");
      added.insert(e.to);
    }
    for (const auto& e : p.edges) {
      if (has_edge(e)) continue;
      parent_.emplace(e.to, e.from);
      children_[e.from].insert(e.to);
      nodes_.insert(e.to);
    }
  }

  /// Detaches leaf n from its parent. Backup and absence records of the edge
  /// are left for the caller to clean up.
  void remove_leaf(const NodeId& n) {
    if (n == root_) throw TreeError("cannot remove the root");
    if (!children(n).empty()) throw TreeError("node '" + n.str() + "' is not a leaf");
    auto it = parent_.find(n);
    if (it == parent_.end()) throw TreeError("node '" + n.str() + "' is not in the tree");
    auto& siblings = children_[it->second];
    siblings.erase(n);
    if (siblings.empty()) children_.erase(it->second);
    parent_.erase(it);
    nodes_.erase(n);
    terminals_.erase(n);
  }

  void set_terminal(const NodeId& n, bool on) {
    if (on) {
      if (!contains(n)) throw TreeError("terminal '" + n.str() + "' is not in the tree");
      terminals_.insert(n);
    } else {
      terminals_.erase(n);
    }
  }

  std::optional<Tag> backup_of(const DirectedEdge& e) const {
    auto it = backup_.find(e);
    if (it == backup_.end()) return std::nullopt;
    return it->second;
  }
  void set_backup(const DirectedEdge& e, Tag t) { backup_[e] = t; }
  void erase_backup(const DirectedEdge& e) { backup_.erase(e); }
  const std::map<DirectedEdge, Tag>& backups() const noexcept { return backup_; }

  /// Subscribers for which no backup path around e existed at install time.
  bool backup_absent(const DirectedEdge& e, const NodeId& v) const {
    auto it = absent_.find(e);
    return it != absent_.end() && it->second.count(v);
  }
  void record_absence(const DirectedEdge& e, const NodeId& v) { absent_[e].insert(v); }
  void forget_absences(const NodeId& v) {
    for (auto it = absent_.begin(); it != absent_.end();) {
      it->second.erase(v);
      it = it->second.empty() ? absent_.erase(it) : std::next(it);
    }
  }
  void forget_absences(const DirectedEdge& e) { absent_.erase(e); }
  const std::map<DirectedEdge, std::set<NodeId>>& absences() const noexcept { return absent_; }

  friend bool operator==(const MulticastTree&, const MulticastTree&) = default;

private:
  NodeId root_;
  Tag tag_ = 0;
  std::size_t depth_ = 0;
  std::set<NodeId> nodes_;
  std::map<NodeId, NodeId> parent_;
  std::map<NodeId, std::set<NodeId>> children_;
  std::set<NodeId> terminals_;
  std::map<DirectedEdge, Tag> backup_;
  std::map<DirectedEdge, std::set<NodeId>> absent_;
};

inline MulticastTree apply_path(MulticastTree t, const Path& p) {
  t.add_path(p);
  return t;
}

/// Full root -> v route implied by a join result.
inline Path full_route(const MulticastTree& t, const Path& p) {
  if (p.empty()) return p;
  auto prefix = t.route_to(p.tail());
  if (!prefix) throw TreeError("path " + to_string(p) + " does not start inside the tree");
  for (const auto& e : p.edges)
    if (!t.has_edge(e)) prefix->edges.push_back(e);
  return *prefix;
}

enum class Strategy { Spt, Dst };

inline std::string to_string(Strategy s) { return s == Strategy::Spt ? "spt" : "dst"; }

namespace detail {

inline void check_join_args(const NetworkView& g, const MulticastTree& t, const NodeId& v) {
  if (!g.network().contains(v)) throw UnknownNode(v.str());
  if (!g.network().contains(t.root())) throw UnknownNode(t.root().str());
}

}  // namespace detail

/// Costs 1 - eps for tree links and 1 otherwise, eps = 1/(|E^T|+1), scaled by
/// (|E^T|+1) so that they are exact integers: |E^T| and |E^T|+1.
class SptCost {
public:
  explicit SptCost(const MulticastTree& t) : tree_(&t), scale_(t.edge_count() + 1) {}

  std::uint64_t operator()(const Link& l) const { return tree_->uses_link(l) ? scale_ - 1 : scale_; }

  /// 1 / (|E^T| + 1).
  double epsilon() const noexcept { return 1.0 / static_cast<double>(scale_); }
  std::uint64_t scale() const noexcept { return scale_; }

private:
  const MulticastTree* tree_;
  std::uint64_t scale_;
};

/// Minimum-hop root -> v path biased towards reusing tree links. Returns the
/// part of that path outside the tree, starting at the last tree node.
inline std::optional<Path> spt_join(const NetworkView& g, const MulticastTree& t, const NodeId& v) {
  detail::check_join_args(g, t, v);
  if (t.contains(v)) return std::nullopt;
  auto nodes = shortest_path(g, t.root(), v, SptCost(t));
  if (!nodes) return std::nullopt;
  std::size_t last_in_tree = 0;
  for (std::size_t i = 0; i < nodes->size(); ++i) {
    if (!t.contains((*nodes)[i])) break;
    last_in_tree = i;
  }
  for (std::size_t i = last_in_tree + 1; i < nodes->size(); ++i)
    if (t.contains((*nodes)[i])) throw TreeError("spt_join: biased path re-enters the tree");
  return Path::from_nodes(std::vector<NodeId>(nodes->begin() + static_cast<std::ptrdiff_t>(last_in_tree), nodes->end()));
}

/// Greedy dynamic Steiner join: attach v to the nearest tree node w (unit
/// costs, ties by `order`) and return root -> w tree path + new segment.
inline std::optional<Path> dst_join(const NetworkView& g, const MulticastTree& t, const NodeId& v,
                                    const NodeOrder& order = {}) {
  detail::check_join_args(g, t, v);
  if (t.contains(v)) return std::nullopt;
  const auto dist = distances_from(g, v);
  std::optional<NodeId> best;
  std::uint64_t best_d = 0;
  for (const auto& w : t.nodes()) {
    auto it = dist.find(w);
    if (it == dist.end()) continue;
    if (!best || it->second < best_d || (it->second == best_d && order.before(w, *best))) {
      best = w;
      best_d = it->second;
    }
  }
  if (!best) return std::nullopt;
  auto segment = shortest_path(g, *best, v);
  if (!segment) return std::nullopt;
  Path p = *t.route_to(*best);
  for (const auto& e : Path::from_nodes(*segment).edges) p.edges.push_back(e);
  return p;
}

/// Join strategy bundle: which algorithm, and the tie order DST uses.
struct Joiner {
  Strategy strategy = Strategy::Spt;
  NodeOrder dst_order{};

  std::optional<Path> operator()(const NetworkView& g, const MulticastTree& t, const NodeId& v) const {
    return strategy == Strategy::Spt ? spt_join(g, t, v) : dst_join(g, t, v, dst_order);
  }
};

inline std::optional<Path> join(const NetworkView& g, const MulticastTree& t, const NodeId& v,
                                Strategy s = Strategy::Spt) {
  return Joiner{s, {}}(g, t, v);
}

}  // namespace mcff
