#pragma once

// Topology model: switches, undirected links and deterministic shortest paths.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mcff {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class TopologyError : public Error {
public:
  using Error::Error;
};

class UnknownNode : public Error {
public:
  explicit UnknownNode(const std::string& id) : Error("unknown node '" + id + "'") {}
};

/// Switch identifier. Ordering is lexicographic and is the tie-break basis
/// for every deterministic choice in the library.
class NodeId {
public:
  NodeId() = default;
  NodeId(std::string name) : name_(std::move(name)) {}
  NodeId(const char* name) : name_(name) {}

  const std::string& str() const noexcept { return name_; }
  bool empty() const noexcept { return name_.empty(); }

  friend bool operator==(const NodeId&, const NodeId&) = default;
  friend auto operator<=>(const NodeId& a, const NodeId& b) { return a.name_ <=> b.name_; }

private:
  std::string name_;
};

inline std::ostream& operator<<(std::ostream& os, const NodeId& n) { return os << n.str(); }

/// Undirected link; endpoints are stored in ascending order.
struct Link {
  NodeId a;
  NodeId b;

  Link() = default;
  Link(NodeId x, NodeId y) : a(std::move(x)), b(std::move(y)) {
    if (b < a) std::swap(a, b);
  }

  bool touches(const NodeId& n) const { return a == n || b == n; }
  const NodeId& other(const NodeId& n) const { return a == n ? b : a; }

  friend bool operator==(const Link&, const Link&) = default;
  friend auto operator<=>(const Link&, const Link&) = default;
};

inline std::string to_string(const Link& l) { return l.a.str() + "-" + l.b.str(); }

/// Directed parent -> child edge of a multicast tree.
struct DirectedEdge {
  NodeId from;
  NodeId to;

  Link link() const { return Link(from, to); }

  friend bool operator==(const DirectedEdge&, const DirectedEdge&) = default;
  friend auto operator<=>(const DirectedEdge&, const DirectedEdge&) = default;
};

inline std::string to_string(const DirectedEdge& e) { return e.from.str() + ">" + e.to.str(); }

using NodeIndex = std::size_t;
using LinkIndex = std::size_t;

/// Immutable undirected simple graph. Node indices follow NodeId order, so
/// comparing indices is the same as comparing ids.
class Network {
public:
  struct Adjacent {
    NodeIndex node;
    LinkIndex link;
  };

  Network() = default;

  /// Builds a network from ids and endpoint pairs. Parallel links collapse
  /// into one; self-loops and unknown endpoints are rejected.
  Network(std::vector<NodeId> nodes, const std::vector<std::pair<NodeId, NodeId>>& links) {
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    for (const auto& n : nodes)
      if (n.empty()) throw TopologyError("empty node id");
    nodes_ = std::move(nodes);
    for (NodeIndex i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i], i);

    std::set<Link> unique;
    for (const auto& [x, y] : links) {
      if (!index_.count(x)) throw TopologyError("link endpoint '" + x.str() + "' is not a node");
      if (!index_.count(y)) throw TopologyError("link endpoint '" + y.str() + "' is not a node");
      if (x == y) throw TopologyError("self-loop at '" + x.str() + "'");
      unique.emplace(x, y);
    }
    links_.assign(unique.begin(), unique.end());
    adjacency_.resize(nodes_.size());
    for (LinkIndex li = 0; li < links_.size(); ++li) {
      const auto ia = index_.at(links_[li].a);
      const auto ib = index_.at(links_[li].b);
      adjacency_[ia].push_back({ib, li});
      adjacency_[ib].push_back({ia, li});
      link_index_.emplace(links_[li], li);
    }
    for (auto& adj : adjacency_)
      std::sort(adj.begin(), adj.end(), [](const Adjacent& l, const Adjacent& r) { return l.node < r.node; });
  }

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t link_count() const noexcept { return links_.size(); }

  const std::vector<NodeId>& nodes() const noexcept { return nodes_; }
  const std::vector<Link>& links() const noexcept { return links_; }
  const NodeId& node(NodeIndex i) const { return nodes_.at(i); }
  const Link& link(LinkIndex i) const { return links_.at(i); }

  bool contains(const NodeId& n) const { return index_.count(n) != 0; }

  NodeIndex index_of(const NodeId& n) const {
    auto it = index_.find(n);
    if (it == index_.end()) throw UnknownNode(n.str());
    return it->second;
  }

  std::optional<LinkIndex> find_link(const Link& l) const {
    auto it = link_index_.find(l);
    if (it == link_index_.end()) return std::nullopt;
    return it->second;
  }

  bool has_link(const Link& l) const { return link_index_.count(l) != 0; }

  const std::vector<Adjacent>& adjacent(NodeIndex i) const { return adjacency_.at(i); }

  /// Neighbor ids in NodeId order.
  std::vector<NodeId> neighbors(const NodeId& n) const {
    std::vector<NodeId> out;
    for (const auto& a : adjacent(index_of(n))) out.push_back(nodes_[a.node]);
    return out;
  }

  std::size_t degree(const NodeId& n) const { return adjacent(index_of(n)).size(); }

private:
  std::vector<NodeId> nodes_;
  std::vector<Link> links_;
  std::map<NodeId, NodeIndex> index_;
  std::map<Link, LinkIndex> link_index_;
  std::vector<std::vector<Adjacent>> adjacency_;
};

/// Complete graph on n switches named s00, s01, ... (zero padded so that
/// lexicographic order equals numeric order).
inline Network complete_graph(std::size_t n) {
  if (n < 2) throw TopologyError("complete graph needs at least 2 nodes");
  const std::size_t width = std::max<std::size_t>(2, std::to_string(n - 1).size());
  std::vector<NodeId> nodes;
  for (std::size_t i = 0; i < n; ++i) {
    auto s = std::to_string(i);
    nodes.emplace_back("s" + std::string(width - s.size(), '0') + s);
  }
  std::vector<std::pair<NodeId, NodeId>> links;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) links.emplace_back(nodes[i], nodes[j]);
  return Network(nodes, links);
}

/// Logical subgraph of a Network with some links removed. The underlying
/// network must outlive the view.
class NetworkView {
public:
  NetworkView(const Network& g) : g_(&g), removed_(g.link_count(), false) {}

  NetworkView(const Network& g, const std::set<Link>& removed) : NetworkView(g) {
    for (const auto& l : removed) remove(l);
  }

  const Network& network() const noexcept { return *g_; }

  void remove(const Link& l) {
    auto li = g_->find_link(l);
    if (!li) throw TopologyError("link " + to_string(l) + " is not in the network");
    if (!removed_[*li]) {
      removed_[*li] = true;
      ++removed_count_;
    }
  }

  bool usable(LinkIndex li) const { return !removed_[li]; }
  bool usable(const Link& l) const {
    auto li = g_->find_link(l);
    return li && !removed_[*li];
  }
  std::size_t link_count() const noexcept { return g_->link_count() - removed_count_; }

private:
  const Network* g_;
  std::vector<bool> removed_;
  std::size_t removed_count_ = 0;
};

inline NetworkView without_links(const Network& g, const std::set<Link>& removed) {
  return NetworkView(g, removed);
}

struct UnitCost {
  std::uint64_t operator()(const Link&) const noexcept { return 1; }
};

namespace detail {

// Single-source Dijkstra over a view. Unreachable nodes stay nullopt.
template <class Cost, class CostFn>
std::vector<std::optional<Cost>> dijkstra(const NetworkView& view, NodeIndex src, CostFn&& cost) {
  const Network& g = view.network();
  std::vector<std::optional<Cost>> dist(g.node_count());
  using Item = std::pair<Cost, NodeIndex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[src] = Cost{};
  heap.emplace(Cost{}, src);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (*dist[u] < d) continue;
    for (const auto& adj : g.adjacent(u)) {
      if (!view.usable(adj.link)) continue;
      const Cost c = cost(g.link(adj.link));
      if (!(c > Cost{})) throw Error("link cost must be positive: " + to_string(g.link(adj.link)));
      const Cost nd = d + c;
      if (!dist[adj.node] || nd < *dist[adj.node]) {
        dist[adj.node] = nd;
        heap.emplace(nd, adj.node);
      }
    }
  }
  return dist;
}

}  // namespace detail

/// Cost-to-node map from src (Dijkstra). Unreachable nodes are absent.
template <class CostFn = UnitCost>
auto distances_from(const NetworkView& view, const NodeId& src, CostFn&& cost = {}) {
  using Cost = std::decay_t<decltype(cost(std::declval<const Link&>()))>;
  const Network& g = view.network();
  auto dist = detail::dijkstra<Cost>(view, g.index_of(src), cost);
  std::map<NodeId, Cost> out;
  for (NodeIndex i = 0; i < dist.size(); ++i)
    if (dist[i]) out.emplace(g.node(i), *dist[i]);
  return out;
}

/// Minimum-cost path src..dst as a node list, or nullopt if disconnected.
/// Among equal-cost paths the lexicographically smallest node sequence wins.
/// Costs must compare exactly (integers or exactly representable values),
/// otherwise equal-cost detection is unreliable.
template <class CostFn = UnitCost>
std::optional<std::vector<NodeId>> shortest_path(const NetworkView& view, const NodeId& src, const NodeId& dst,
                                                 CostFn&& cost = {}) {
  using Cost = std::decay_t<decltype(cost(std::declval<const Link&>()))>;
  const Network& g = view.network();
  const NodeIndex s = g.index_of(src);
  const NodeIndex t = g.index_of(dst);
  // Distances towards dst let us walk forward from src, always stepping to
  // the smallest neighbor that stays on some optimal path.
  auto to_dst = detail::dijkstra<Cost>(view, t, cost);
  if (!to_dst[s]) return std::nullopt;
  std::vector<NodeId> path{g.node(s)};
  NodeIndex cur = s;
  while (cur != t) {
    std::optional<NodeIndex> next;
    for (const auto& adj : g.adjacent(cur)) {  // ascending NodeId order
      if (!view.usable(adj.link) || !to_dst[adj.node]) continue;
      if (cost(g.link(adj.link)) + *to_dst[adj.node] == *to_dst[cur]) {
        next = adj.node;
        break;
      }
    }
    if (!next) throw Error("shortest_path: inconsistent distance labels");
    cur = *next;
    path.push_back(g.node(cur));
  }
  return path;
}

template <class CostFn = UnitCost>
std::optional<std::vector<NodeId>> shortest_path(const Network& g, const NodeId& src, const NodeId& dst,
                                                 CostFn&& cost = {}) {
  return shortest_path(NetworkView(g), src, dst, std::forward<CostFn>(cost));
}

/// Total order over nodes used to break ties between otherwise equivalent
/// attachment points. The default is NodeId order.
class NodeOrder {
public:
  NodeOrder() = default;

  /// Ranks follow the given sequence; nodes not listed rank after all
  /// listed ones, in NodeId order.
  explicit NodeOrder(const std::vector<NodeId>& sequence) {
    for (std::size_t i = 0; i < sequence.size(); ++i) rank_.emplace(sequence[i], i);
  }

  bool before(const NodeId& a, const NodeId& b) const {
    if (rank_.empty()) return a < b;
    auto ra = rank_.find(a);
    auto rb = rank_.find(b);
    const auto na = ra == rank_.end() ? rank_.size() : ra->second;
    const auto nb = rb == rank_.end() ? rank_.size() : rb->second;
    if (na != nb) return na < nb;
    return a < b;
  }

  bool lexicographic() const noexcept { return rank_.empty(); }

private:
  std::map<NodeId, std::size_t> rank_;
};

}  // namespace mcff
