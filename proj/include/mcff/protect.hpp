#pragma once

// F-link protection: recursive per-link backup trees, tag allocation and leaves.

#include <cstddef>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "treealg.hpp"

namespace mcff {

inline constexpr Tag kMaxTag = 4094;

class TagSpaceExhausted : public Error {
public:
  TagSpaceExhausted() : Error("VLAN tag space exhausted (4094 tags)") {}
};

struct ProtectionConfig {
  std::size_t fault_tolerance = 1;
  Strategy strategy = Strategy::Spt;
  /// Tie order for DST attachment points; default is NodeId order.
  NodeOrder dst_order{};
};

using GroupKey = std::string;

/// Counters for one group. `join_calls` counts strategy join invocations.
struct ProtectStats {
  std::size_t join_calls = 0;
  std::size_t last_join_calls = 0;
  std::size_t backup_paths = 0;
  std::size_t absent_backups = 0;
};

/// The primary tree of one (source, group) pair plus every backup tree
/// reachable from it, addressed by tag.
class GroupState {
public:
  GroupState(GroupKey key, NodeId source, ProtectionConfig config)
      : key_(std::move(key)), source_(std::move(source)), config_(std::move(config)) {
    trees_.emplace(Tag{0}, MulticastTree(source_, 0, 0));
  }

  const GroupKey& key() const noexcept { return key_; }
  const NodeId& source() const noexcept { return source_; }
  const ProtectionConfig& config() const noexcept { return config_; }

  const MulticastTree& primary() const { return trees_.at(0); }
  MulticastTree& primary() { return trees_.at(0); }

  const MulticastTree& tree(Tag t) const {
    auto it = trees_.find(t);
    if (it == trees_.end()) throw TreeError("no tree with tag " + std::to_string(t));
    return it->second;
  }
  MulticastTree& tree(Tag t) {
    auto it = trees_.find(t);
    if (it == trees_.end()) throw TreeError("no tree with tag " + std::to_string(t));
    return it->second;
  }
  bool has_tree(Tag t) const { return trees_.count(t) != 0; }
  const std::map<Tag, MulticastTree>& trees() const noexcept { return trees_; }

  /// Backup tree of edge e in tree `owner`, if one was created.
  const MulticastTree* backup(const MulticastTree& owner, const DirectedEdge& e) const {
    auto t = owner.backup_of(e);
    return t ? &trees_.at(*t) : nullptr;
  }

  const std::set<NodeId>& subscribers() const { return primary().terminals(); }

  /// Number of tags currently held by backup trees.
  std::size_t tags_in_use() const noexcept { return trees_.size() - 1; }
  Tag next_tag() const noexcept { return next_tag_; }

  /// Returns the next unused tag; tags are never reused.
  Tag fresh_tag() {
    if (next_tag_ > kMaxTag) throw TagSpaceExhausted();
    return next_tag_++;
  }

  MulticastTree& create_tree(const NodeId& root, std::size_t depth) {
    const Tag t = fresh_tag();
    return trees_.emplace(t, MulticastTree(root, t, depth)).first->second;
  }

  void erase_tree(Tag t) {
    if (t == 0) throw TreeError("cannot erase the primary tree");
    trees_.erase(t);
  }

  ProtectStats& stats() noexcept { return stats_; }
  const ProtectStats& stats() const noexcept { return stats_; }

  /// Structural equality ignoring the tag counter and statistics.
  bool same_structure(const GroupState& o) const { return key_ == o.key_ && trees_ == o.trees_; }

private:
  GroupKey key_;
  NodeId source_;
  ProtectionConfig config_;
  std::map<Tag, MulticastTree> trees_;
  Tag next_tag_ = 1;
  ProtectStats stats_;
};

/// Receiver of flow installation events. `installed` fires after the edges
/// were added to `tree`, `removed` after the edge was detached.
template <class S>
concept InstallSink = requires(S& s, const GroupState& gs, const MulticastTree& t, const std::vector<DirectedEdge>& edges,
                               const DirectedEdge& e, const NodeId& n) {
  s.installed(gs, t, edges, n);
  s.removed(gs, t, e);
  s.unsubscribed(gs, t, n);
};

struct NullSink {
  void installed(const GroupState&, const MulticastTree&, const std::vector<DirectedEdge>&, const NodeId&) {}
  void removed(const GroupState&, const MulticastTree&, const DirectedEdge&) {}
  void unsubscribed(const GroupState&, const MulticastTree&, const NodeId&) {}
};

namespace detail {

struct WorkItem {
  Path route;  // full root -> v route in `tree`
  Tag tree;
  std::set<Link> down;
};

// Adds v to tree t (joining or promoting an on-tree relay). Returns the full
// route to v, or nullopt when v cannot be reached.
template <InstallSink Sink>
std::optional<Path> attach(GroupState& gs, Tag t, const NetworkView& g, const NodeId& v, Sink& sink) {
  MulticastTree& tree = gs.tree(t);
  if (tree.contains(v)) {
    const bool newly = !tree.is_terminal(v);
    tree.set_terminal(v, true);
    if (newly) sink.installed(gs, tree, {}, v);
    return tree.route_to(v);
  }
  const Joiner joiner{gs.config().strategy, gs.config().dst_order};
  ++gs.stats().join_calls;
  ++gs.stats().last_join_calls;
  auto p = joiner(g, tree, v);
  if (!p) return std::nullopt;
  std::vector<DirectedEdge> fresh;
  for (const auto& e : p->edges)
    if (!tree.has_edge(e)) fresh.push_back(e);
  tree.add_path(*p);
  tree.set_terminal(v, true);
  sink.installed(gs, tree, fresh, v);
  return tree.route_to(v);
}

}  // namespace detail

/// Adds subscriber v: primary path first, then backup paths breadth-first
/// for every edge on it, recursively until the down-set reaches F links.
/// Returns false if v already subscribes or cannot be reached.
template <InstallSink Sink = NullSink>
bool protect_join(GroupState& gs, const Network& g, const NodeId& v, Sink&& sink = {}) {
  if (!g.contains(v)) throw UnknownNode(v.str());
  gs.stats().last_join_calls = 0;
  if (v == gs.source() || gs.primary().is_terminal(v)) return false;

  auto route = detail::attach(gs, 0, NetworkView(g), v, sink);
  if (!route) return false;

  const std::size_t F = gs.config().fault_tolerance;
  std::deque<detail::WorkItem> queue;
  if (F > 0) queue.push_back({*route, 0, {}});
  while (!queue.empty()) {
    auto item = std::move(queue.front());
    queue.pop_front();
    for (const auto& e : item.route.edges) {
      const MulticastTree& owner = gs.tree(item.tree);
      Tag backup_tag;
      if (auto existing = owner.backup_of(e)) {
        backup_tag = *existing;
      } else {
        backup_tag = gs.create_tree(e.from, item.down.size() + 1).tag();
        gs.tree(item.tree).set_backup(e, backup_tag);
      }
      std::set<Link> down = item.down;
      down.insert(e.link());
      auto b_route = detail::attach(gs, backup_tag, NetworkView(g, down), v, sink);
      if (!b_route) {
        gs.tree(item.tree).record_absence(e, v);
        ++gs.stats().absent_backups;
        continue;
      }
      ++gs.stats().backup_paths;
      if (down.size() < F) queue.push_back({std::move(*b_route), backup_tag, std::move(down)});
    }
  }
  return true;
}

namespace detail {

template <InstallSink Sink>
void erase_backup_subtree(GroupState& gs, Tag t, Sink& sink) {
  std::vector<Tag> nested;
  for (const auto& [e, tag] : gs.tree(t).backups()) nested.push_back(tag);
  for (Tag n : nested) erase_backup_subtree(gs, n, sink);
  MulticastTree& tree = gs.tree(t);
  // Normally empty by now; drain anything left so no flow outlives its tree.
  while (tree.edge_count() > 0) {
    for (const auto& e : tree.edges()) {
      if (!tree.children(e.to).empty()) continue;
      tree.remove_leaf(e.to);
      sink.removed(gs, tree, e);
      break;
    }
  }
  gs.erase_tree(t);
}

template <InstallSink Sink>
void leave(GroupState& gs, Tag t, const NodeId& v, Sink& sink) {
  MulticastTree& tree = gs.tree(t);
  if (v == tree.root() || !tree.is_terminal(v)) return;
  const Path route = *tree.route_to(v);

  // Primary flows first: drop the branch that only leads to v.
  tree.set_terminal(v, false);
  tree.forget_absences(v);
  sink.unsubscribed(gs, tree, v);
  std::vector<DirectedEdge> pruned;
  NodeId cur = v;
  while (cur != tree.root() && tree.children(cur).empty() && !tree.is_terminal(cur)) {
    const NodeId pre = *tree.parent(cur);
    tree.remove_leaf(cur);
    pruned.push_back({pre, cur});
    sink.removed(gs, tree, pruned.back());
    cur = pre;
  }

  // Then every backup tree along the route captured before pruning.
  for (const auto& e : route.edges)
    if (auto b = gs.tree(t).backup_of(e)) leave(gs, *b, v, sink);

  // Finally forget the protection of edges that no longer exist.
  for (const auto& e : pruned) {
    MulticastTree& owner = gs.tree(t);
    auto b = owner.backup_of(e);
    owner.erase_backup(e);
    owner.forget_absences(e);
    if (b) erase_backup_subtree(gs, *b, sink);
  }
}

}  // namespace detail

/// Removes subscriber v from the primary tree and every backup tree that
/// serves it. No-op for the source or non-subscribers.
template <InstallSink Sink = NullSink>
bool protect_leave(GroupState& gs, const NodeId& v, Sink&& sink = {}) {
  if (v == gs.source() || !gs.primary().is_terminal(v)) return false;
  detail::leave(gs, 0, v, sink);
  return true;
}

}  // namespace mcff
