#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace mcff;
using namespace testing_support;

namespace {

struct CountingSink {
  std::size_t installed_edges = 0, removed_edges = 0, installs = 0, unsubscribes = 0;
  void installed(const GroupState&, const MulticastTree&, const std::vector<DirectedEdge>& e, const NodeId&) {
    installed_edges += e.size();
    ++installs;
  }
  void removed(const GroupState&, const MulticastTree&, const DirectedEdge&) { ++removed_edges; }
  void unsubscribed(const GroupState&, const MulticastTree&, const NodeId&) { ++unsubscribes; }
};

std::size_t total_edges(const GroupState& gs) {
  std::size_t s = 0;
  for (const auto& [t, tree] : gs.trees()) s += tree.edge_count();
  return s;
}

// Walks every (tree, subscriber) pair reachable from the primary and checks
// the protection promise against a BFS oracle.
void check_tree(const Network& g, const GroupState& gs, const MulticastTree& t, const NodeId& v,
                const std::set<Link>& down, std::vector<std::string>& errors) {
  const auto route = t.route_to(v);
  if (!route) {
    errors.push_back("tree " + std::to_string(t.tag()) + " lacks " + v.str());
    return;
  }
  for (const auto& e : route->edges)
    if (down.count(e.link())) errors.push_back("tree " + std::to_string(t.tag()) + " uses down link " + to_string(e));
  if (t.depth() >= gs.config().fault_tolerance) {
    if (!t.backups().empty()) errors.push_back("tree at full depth has backups");
    return;
  }
  for (const auto& e : route->edges) {
    const MulticastTree* b = gs.backup(t, e);
    if (!b) {
      errors.push_back("edge " + to_string(e) + " unprotected");
      continue;
    }
    if (b->root() != e.from) errors.push_back("backup of " + to_string(e) + " has wrong root");
    if (b->depth() != t.depth() + 1) errors.push_back("backup of " + to_string(e) + " has wrong depth");
    std::set<Link> d = down;
    d.insert(e.link());
    const bool reachable = bfs(g, e.from, d).count(v) != 0;
    if (b->is_terminal(v)) {
      if (!reachable) errors.push_back("backup reaches " + v.str() + " over removed links");
      if (t.backup_absent(e, v)) errors.push_back("stale absence for " + v.str());
      check_tree(g, gs, *b, v, d, errors);
    } else {
      if (reachable) errors.push_back("backup of " + to_string(e) + " skipped reachable " + v.str());
      if (!t.backup_absent(e, v)) errors.push_back("absence of " + v.str() + " not recorded");
    }
  }
}

std::vector<std::string> check_protection(const Network& g, const GroupState& gs) {
  std::vector<std::string> errors;
  for (const auto& v : gs.subscribers()) check_tree(g, gs, gs.primary(), v, {}, errors);
  // Every tree hangs off exactly one owner edge.
  std::map<Tag, int> owners;
  for (const auto& [tag, t] : gs.trees())
    for (const auto& [e, b] : t.backups()) ++owners[b];
  for (const auto& [tag, t] : gs.trees())
    if (tag != 0 && owners[tag] != 1) errors.push_back("tree " + std::to_string(tag) + " is orphaned or shared");
  return errors;
}

}  // namespace

TEST(ProtectJoin, TriangleSingleLink) {
  auto g = triangle();
  GroupState gs("g", "A", {1, Strategy::Spt, {}});
  ASSERT_TRUE(protect_join(gs, g, "C"));
  EXPECT_EQ(to_string(*gs.primary().route_to("C")), "A>C");
  ASSERT_EQ(gs.tags_in_use(), 1u);
  const MulticastTree* b = gs.backup(gs.primary(), {"A", "C"});
  ASSERT_NE(b, nullptr);
  EXPECT_EQ(b->tag(), 1u);
  EXPECT_EQ(b->root(), NodeId("A"));
  EXPECT_EQ(to_string(*b->route_to("C")), "A>B>C");
  EXPECT_TRUE(b->backups().empty());
  EXPECT_TRUE(check_protection(g, gs).empty());
}

TEST(ProtectJoin, RejectsSourceDuplicatesAndUnknown) {
  auto g = triangle();
  GroupState gs("g", "A", {1, Strategy::Spt, {}});
  EXPECT_FALSE(protect_join(gs, g, "A"));
  EXPECT_TRUE(protect_join(gs, g, "B"));
  const auto tags = gs.next_tag();
  EXPECT_FALSE(protect_join(gs, g, "B"));
  EXPECT_EQ(gs.next_tag(), tags);
  EXPECT_THROW(protect_join(gs, g, "Q"), UnknownNode);
}

TEST(ProtectJoin, UnreachableSubscriber) {
  auto g = make({"A", "B", "C"}, {{"A", "B"}});
  GroupState gs("g", "A", {1, Strategy::Spt, {}});
  EXPECT_FALSE(protect_join(gs, g, "C"));
  EXPECT_TRUE(gs.subscribers().empty());
  EXPECT_EQ(gs.tags_in_use(), 0u);
}

TEST(ProtectJoin, BridgeLinksRecordAbsence) {
  auto g = make({"A", "B", "C"}, {{"A", "B"}, {"B", "C"}});
  GroupState gs("g", "A", {1, Strategy::Spt, {}});
  ASSERT_TRUE(protect_join(gs, g, "C"));
  EXPECT_TRUE(gs.primary().backup_absent({"A", "B"}, "C"));
  EXPECT_TRUE(gs.primary().backup_absent({"B", "C"}, "C"));
  EXPECT_EQ(gs.stats().absent_backups, 2u);
  EXPECT_TRUE(check_protection(g, gs).empty());
}

TEST(ProtectJoin, RelayBecomesTerminal) {
  auto g = make({"A", "B", "C"}, {{"A", "B"}, {"B", "C"}});
  GroupState gs("g", "A", {0, Strategy::Spt, {}});
  CountingSink sink;
  ASSERT_TRUE(protect_join(gs, g, "C", sink));
  EXPECT_EQ(sink.installed_edges, 2u);
  ASSERT_TRUE(protect_join(gs, g, "B", sink));
  EXPECT_TRUE(gs.primary().is_terminal("B"));
  EXPECT_EQ(gs.primary().edge_count(), 2u);
  EXPECT_EQ(sink.installed_edges, 2u);
  EXPECT_EQ(sink.installs, 2u);
  EXPECT_EQ(gs.stats().last_join_calls, 0u);
}

TEST(ProtectJoin, ZeroToleranceBuildsNoBackups) {
  auto g = complete_graph(6);
  GroupState gs("g", "s00", {0, Strategy::Spt, {}});
  for (const auto& v : g.nodes()) protect_join(gs, g, v);
  EXPECT_EQ(gs.tags_in_use(), 0u);
  EXPECT_EQ(gs.subscribers().size(), 5u);
}

TEST(ProtectJoin, TagSpaceExhaustion) {
  auto g = triangle();
  GroupState gs("g", "A", {1, Strategy::Spt, {}});
  for (Tag t = 1; t <= kMaxTag; ++t) gs.create_tree("A", 1);
  EXPECT_EQ(gs.next_tag(), kMaxTag + 1);
  EXPECT_THROW(protect_join(gs, g, "C"), TagSpaceExhausted);
}

TEST(ProtectJoin, TagsAreNeverReused) {
  auto g = triangle();
  GroupState gs("g", "A", {1, Strategy::Spt, {}});
  protect_join(gs, g, "C");
  const Tag first = *gs.primary().backup_of({"A", "C"});
  protect_leave(gs, "C");
  EXPECT_EQ(gs.tags_in_use(), 0u);
  protect_join(gs, g, "C");
  EXPECT_GT(*gs.primary().backup_of({"A", "C"}), first);
}

TEST(ProtectJoin, NestedBackupsOnCompleteGraph) {
  auto g = complete_graph(5);
  GroupState gs("g", "s00", {2, Strategy::Spt, {}});
  ASSERT_TRUE(protect_join(gs, g, "s01"));
  // primary s00>s01; depth-1 tree s00>s02>s01; one depth-2 tree per edge of it
  EXPECT_EQ(gs.tags_in_use(), 3u);
  const MulticastTree* b1 = gs.backup(gs.primary(), {"s00", "s01"});
  ASSERT_NE(b1, nullptr);
  EXPECT_EQ(to_string(*b1->route_to("s01")), "s00>s02>s01");
  const MulticastTree* b2 = gs.backup(*b1, {"s02", "s01"});
  ASSERT_NE(b2, nullptr);
  EXPECT_EQ(b2->root(), NodeId("s02"));
  EXPECT_EQ(to_string(*b2->route_to("s01")), "s02>s03>s01");
  EXPECT_TRUE(check_protection(g, gs).empty());
}

TEST(ProtectLeave, NoOpCases) {
  auto g = triangle();
  GroupState gs("g", "A", {1, Strategy::Spt, {}});
  EXPECT_FALSE(protect_leave(gs, "A"));
  EXPECT_FALSE(protect_leave(gs, "B"));
}

TEST(ProtectLeave, KeepsRelaySubscribers) {
  auto g = make({"A", "B", "C"}, {{"A", "B"}, {"B", "C"}});
  GroupState gs("g", "A", {1, Strategy::Spt, {}});
  protect_join(gs, g, "B");
  protect_join(gs, g, "C");
  ASSERT_TRUE(protect_leave(gs, "C"));
  EXPECT_TRUE(gs.primary().is_terminal("B"));
  EXPECT_TRUE(gs.primary().has_edge({"A", "B"}));
  EXPECT_FALSE(gs.primary().contains("C"));
  EXPECT_TRUE(gs.primary().backup_absent({"A", "B"}, "B"));
  EXPECT_FALSE(gs.primary().backup_absent({"A", "B"}, "C"));
}

TEST(ProtectLeave, SinkSeesEveryRemovedEdge) {
  auto g = complete_graph(6);
  GroupState gs("g", "s00", {2, Strategy::Spt, {}});
  CountingSink sink;
  for (const auto& v : g.nodes()) protect_join(gs, g, v, sink);
  EXPECT_EQ(sink.installed_edges, total_edges(gs));
  for (const auto& v : g.nodes()) protect_leave(gs, v, sink);
  EXPECT_EQ(sink.removed_edges, sink.installed_edges);
  EXPECT_EQ(total_edges(gs), 0u);
  EXPECT_EQ(gs.tags_in_use(), 0u);
}

TEST(ProtectProperty, RandomJoinLeaveSequences) {
  std::mt19937_64 rng(21);
  for (int round = 0; round < 150; ++round) {
    std::uniform_int_distribution<std::size_t> size(3, 12), fdist(0, 3);
    auto g = random_connected(rng, size(rng), 0.3);
    const std::size_t F = fdist(rng);
    const Strategy s = round % 2 ? Strategy::Dst : Strategy::Spt;
    GroupState gs("g", g.node(0), {F, s, {}});
    std::uniform_int_distribution<std::size_t> pick(1, g.node_count() - 1);
    for (int step = 0; step < 20; ++step) {
      const NodeId v = g.node(pick(rng));
      if (gs.subscribers().count(v)) protect_leave(gs, v);
      else ASSERT_TRUE(protect_join(gs, g, v));
      const auto errors = check_protection(g, gs);
      ASSERT_TRUE(errors.empty()) << "round " << round << " step " << step << ": " << errors.front();
      if (s == Strategy::Spt) {
        const auto dist = bfs(g, gs.source());
        for (const auto& sub : gs.subscribers()) EXPECT_EQ(gs.primary().hops_to(sub), dist.at(sub));
      }
    }
  }
}

TEST(ProtectProperty, JoinThenLeaveRestoresStructure) {
  std::mt19937_64 rng(33);
  for (int round = 0; round < 150; ++round) {
    std::uniform_int_distribution<std::size_t> size(3, 12), fdist(1, 2);
    auto g = random_connected(rng, size(rng), 0.3);
    GroupState gs("g", g.node(0), {fdist(rng), round % 2 ? Strategy::Dst : Strategy::Spt, {}});
    std::vector<NodeId> others(g.nodes().begin() + 1, g.nodes().end());
    std::shuffle(others.begin(), others.end(), rng);
    const NodeId probe = others.back();
    others.pop_back();
    for (std::size_t i = 0; i < others.size() / 2; ++i) protect_join(gs, g, others[i]);
    const GroupState before = gs;
    ASSERT_TRUE(protect_join(gs, g, probe));
    ASSERT_TRUE(protect_leave(gs, probe));
    EXPECT_TRUE(gs.same_structure(before)) << "round " << round;
  }
}

TEST(ProtectProperty, JoinCallsWithinEdgePowerBound) {
  std::mt19937_64 rng(44);
  std::vector<Network> graphs{geant_topology(), complete_graph(8), triangle()};
  for (int i = 0; i < 20; ++i) graphs.push_back(random_connected(rng, 10, 0.3));
  for (const auto& g : graphs) {
    for (std::size_t F = 1; F <= 3; ++F) {
      GroupState gs("g", g.node(0), {F, Strategy::Spt, {}});
      const double bound = 4.0 * std::pow(static_cast<double>(g.link_count()), static_cast<double>(F));
      for (const auto& v : g.nodes()) {
        protect_join(gs, g, v);
        EXPECT_LE(static_cast<double>(gs.stats().last_join_calls), bound);
      }
    }
  }
}
