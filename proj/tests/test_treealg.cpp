#include <gtest/gtest.h>

#include "support.hpp"

using namespace mcff;
using namespace testing_support;

namespace {

Network square_with_tail() {
  // r - a - c, r - b - c, c - d
  return make({"r", "a", "b", "c", "d"}, {{"r", "a"}, {"r", "b"}, {"a", "c"}, {"b", "c"}, {"c", "d"}});
}

}  // namespace

TEST(MulticastTree, AddPathAndRoute) {
  MulticastTree t("r");
  t.add_path(Path::from_nodes({"r", "a", "c"}));
  EXPECT_EQ(t.edge_count(), 2u);
  EXPECT_EQ(t.parent("c"), NodeId("a"));
  EXPECT_EQ(t.route_to("c")->size(), 2u);
  EXPECT_EQ(t.route_to("r")->size(), 0u);
  EXPECT_FALSE(t.route_to("zz"));
  EXPECT_TRUE(t.uses_link(Link("c", "a")));
  // Existing edges are skipped, not duplicated.
  t.add_path(Path::from_nodes({"r", "a", "d"}));
  EXPECT_EQ(t.edge_count(), 3u);
  EXPECT_EQ(t.children("a"), (std::set<NodeId>{"c", "d"}));
}

TEST(MulticastTree, BadPathLeavesTreeUntouched) {
  MulticastTree t("r");
  t.add_path(Path::from_nodes({"r", "a"}));
  const auto before = t;
  EXPECT_THROW(t.add_path(Path::from_nodes({"x", "y"})), TreeError);          // not rooted in tree
  EXPECT_THROW(t.add_path(Path::from_nodes({"a", "b", "r"})), TreeError);     // root gets a parent
  EXPECT_THROW(t.add_path(Path::from_nodes({"r", "b", "a"})), TreeError);     // second parent
  EXPECT_THROW(t.add_path(Path{{{"r", "b"}, {"c", "d"}}}), TreeError);        // not chained
  EXPECT_EQ(t, before);
}

TEST(MulticastTree, RemoveLeaf) {
  MulticastTree t("r");
  t.add_path(Path::from_nodes({"r", "a", "b"}));
  t.set_terminal("b", true);
  EXPECT_THROW(t.remove_leaf("a"), TreeError);
  EXPECT_THROW(t.remove_leaf("r"), TreeError);
  t.remove_leaf("b");
  EXPECT_FALSE(t.contains("b"));
  EXPECT_FALSE(t.is_terminal("b"));
  EXPECT_TRUE(t.children("a").empty());
  EXPECT_THROW(t.set_terminal("b", true), TreeError);
}

TEST(SptCost, EpsilonShrinksWithTree) {
  MulticastTree t("r");
  EXPECT_DOUBLE_EQ(SptCost(t).epsilon(), 1.0);
  t.add_path(Path::from_nodes({"r", "a", "b"}));
  SptCost c(t);
  EXPECT_DOUBLE_EQ(c.epsilon(), 1.0 / 3.0);
  EXPECT_EQ(c(Link("r", "a")), 2u);
  EXPECT_EQ(c(Link("r", "b")), 3u);
}

TEST(SptJoin, EmptyTreeGivesShortestPath) {
  auto g = square_with_tail();
  MulticastTree t("r");
  auto p = spt_join(g, t, "d");
  ASSERT_TRUE(p);
  EXPECT_EQ(to_string(*p), "r>a>c>d");
}

TEST(SptJoin, PrefersTreeLinksAmongMinHopPaths) {
  auto g = square_with_tail();
  MulticastTree t("r");
  t.add_path(Path::from_nodes({"r", "b"}));
  auto p = spt_join(g, t, "c");
  ASSERT_TRUE(p);
  EXPECT_EQ(to_string(*p), "b>c");  // suffix only
  EXPECT_EQ(to_string(full_route(t, *p)), "r>b>c");
}

TEST(SptJoin, NeverTradesHopsForReuse) {
  // Tree holds the long way round r-a-b-c; direct link r-c must still win.
  auto g = make({"r", "a", "b", "c"}, {{"r", "a"}, {"a", "b"}, {"b", "c"}, {"r", "c"}});
  MulticastTree t("r");
  t.add_path(Path::from_nodes({"r", "a", "b"}));
  auto p = spt_join(g, t, "c");
  ASSERT_TRUE(p);
  EXPECT_EQ(to_string(*p), "r>c");
}

TEST(SptJoin, AbsentCases) {
  auto g = make({"r", "a", "z"}, {{"r", "a"}});
  MulticastTree t("r");
  EXPECT_FALSE(spt_join(g, t, "z"));
  EXPECT_FALSE(spt_join(g, t, "r"));
  EXPECT_THROW(spt_join(g, t, "nope"), UnknownNode);
}

TEST(SptJoin, MinimalNewLinksAgainstBfsOracle) {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 300; ++round) {
    std::uniform_int_distribution<std::size_t> size(3, 16);
    auto g = random_connected(rng, size(rng), 0.2);
    const NodeId root = g.node(0);
    const auto from_root = bfs(g, root);
    std::vector<NodeId> order(g.nodes().begin() + 1, g.nodes().end());
    std::shuffle(order.begin(), order.end(), rng);
    MulticastTree t(root);
    for (const auto& v : order) {
      if (t.contains(v)) continue;
      auto p = spt_join(g, t, v);
      ASSERT_TRUE(p);
      const auto from_v = bfs(g, v);
      // Deepest tree node lying on some min-hop root -> v path.
      std::size_t best = 0;
      for (const auto& w : t.nodes())
        if (from_root.at(w) + from_v.at(w) == from_root.at(v)) best = std::max(best, from_root.at(w));
      EXPECT_EQ(p->size(), from_root.at(v) - best);
      EXPECT_EQ(full_route(t, *p).size(), from_root.at(v));
      t.add_path(*p);
      t.set_terminal(v, true);
    }
  }
}

TEST(DstJoin, SingleNodeTreeMatchesSpt) {
  auto g = square_with_tail();
  MulticastTree t("r");
  EXPECT_EQ(dst_join(g, t, "d"), spt_join(g, t, "d"));
}

TEST(DstJoin, AttachesToNearestTreeNode) {
  auto g = make({"r", "a", "b", "c", "x"}, {{"r", "a"}, {"a", "b"}, {"b", "c"}, {"r", "x"}, {"x", "c"}});
  MulticastTree t("r");
  t.add_path(Path::from_nodes({"r", "a", "b"}));
  auto p = dst_join(g, t, "c");
  ASSERT_TRUE(p);
  // c is one hop from b; spt would take r-x-c instead.
  EXPECT_EQ(to_string(*p), "r>a>b>c");
  EXPECT_EQ(to_string(*spt_join(g, t, "c")), "r>x>c");
}

TEST(DstJoin, TieOrderDecides) {
  auto g = complete_graph(4);
  MulticastTree t("s00");
  t.add_path(Path::from_nodes({"s00", "s01"}));
  t.add_path(Path::from_nodes({"s00", "s02"}));
  EXPECT_EQ(to_string(*dst_join(g, t, "s03")), "s00>s03");
  NodeOrder prefer_s02(std::vector<NodeId>{"s02"});
  EXPECT_EQ(to_string(*dst_join(g, t, "s03", prefer_s02)), "s00>s02>s03");
}

TEST(DstJoin, SegmentLengthIsNearestDistance) {
  std::mt19937_64 rng(9);
  for (int round = 0; round < 200; ++round) {
    auto g = random_connected(rng, 12, 0.2);
    MulticastTree t(g.node(0));
    for (std::size_t i = 1; i < g.node_count(); ++i) {
      const NodeId v = g.node(i);
      if (t.contains(v)) continue;
      const auto from_v = bfs(g, v);
      std::size_t nearest = SIZE_MAX;
      for (const auto& w : t.nodes()) nearest = std::min(nearest, from_v.at(w));
      auto p = dst_join(g, t, v);
      ASSERT_TRUE(p);
      std::size_t fresh = 0;
      for (const auto& e : p->edges) fresh += t.has_edge(e) ? 0 : 1;
      EXPECT_EQ(fresh, nearest);
      t.add_path(*p);
    }
  }
}

TEST(Joiner, DispatchesOnStrategy) {
  auto g = make({"r", "a", "b", "c", "x"}, {{"r", "a"}, {"a", "b"}, {"b", "c"}, {"r", "x"}, {"x", "c"}});
  MulticastTree t("r");
  t.add_path(Path::from_nodes({"r", "a", "b"}));
  EXPECT_EQ(join(g, t, "c", Strategy::Spt), spt_join(g, t, "c"));
  EXPECT_EQ(join(g, t, "c", Strategy::Dst), dst_join(g, t, "c"));
}
