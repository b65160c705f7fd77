#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "otcloak/errors.hpp"
#include "otcloak/geometry.hpp"
#include "otcloak/training.hpp"

namespace otcloak {
namespace {

using fixture::add;

DistanceParams sharp() {
  DistanceParams p;
  p.sinkhorn.epsilon = 0.01;
  p.sinkhorn.max_iterations = 5000;
  return p;
}

TEST(Geometry, SelfDistanceOfSingleAtomIsZero) {
  DirectedSocialGraph g(fixture::kContentDim);
  const NodeId v = add(g, Label::Human, 0.5, 1.0);
  const NodeId u = add(g, Label::Human, 0.4, 1.0);
  g.add_edge(v, u);
  const OtGeometry geo = fixture::small_geometry();
  EXPECT_EQ(ot_distance(geo, g, v, v, {}), 0.0);
}

TEST(Geometry, CacheHitsAndRevisionInvalidation) {
  fixture::Fixture f = fixture::build();
  const OtGeometry geo = fixture::small_geometry();
  DistanceCache cache;
  const double d1 = ot_distance(geo, f.graph, f.bots[0], f.humans[3], {}, &cache);
  const std::size_t hits = cache.hits();
  const double d2 = ot_distance(geo, f.graph, f.bots[0], f.humans[3], {}, &cache);
  EXPECT_EQ(d1, d2);
  EXPECT_GT(cache.hits(), hits);
  EXPECT_GE(d1, 0.0);

  f.graph.add_edge(f.bots[0], f.humans[5]);
  const double d3 = ot_distance(geo, f.graph, f.bots[0], f.humans[3], {}, &cache);
  EXPECT_NE(d3, d1);
  EXPECT_EQ(d3, ot_distance(geo, f.graph, f.bots[0], f.humans[3], {}));
  f.graph.reset_to_baseline();
  EXPECT_EQ(ot_distance(geo, f.graph, f.bots[0], f.humans[3], {}, &cache), d1);
}

TEST(Geometry, DistancesAreNonnegative) {
  fixture::Fixture f = fixture::build();
  const OtGeometry geo = fixture::small_geometry();
  for (NodeId a : f.humans)
    for (NodeId b : f.bots) EXPECT_GE(ot_distance(geo, f.graph, a, b, {}), 0.0);
  const NodeId lone = add(f.graph, Label::Bot, 0.0, 0.0);
  EXPECT_THROW(ot_distance(geo, f.graph, f.humans[0], lone, {}), EmptyNeighborhood);
}

TEST(Geometry, NearHumanBotHasNegativeMargin) {
  // Bot b and human h follow the same two humans and share age and content,
  // so their measures coincide; the other bot follows bots only.
  DirectedSocialGraph g(fixture::kContentDim);
  const NodeId x1 = add(g, Label::Human, 0.7, 1.0);
  const NodeId x2 = add(g, Label::Human, 0.9, 1.0);
  const NodeId h = add(g, Label::Human, 0.5, 1.0);
  const NodeId b = add(g, Label::Bot, 0.5, 1.0);
  const NodeId o = add(g, Label::Bot, 0.1, -1.0);
  const NodeId y = add(g, Label::Bot, 0.1, -1.0);
  for (NodeId s : {h, b}) {
    g.add_edge(s, x1);
    g.add_edge(s, x2);
  }
  g.add_edge(o, y);
  g.add_edge(y, o);
  const OtGeometry geo = fixture::small_geometry();
  const std::vector<Label> pred{Label::Human, Label::Human, Label::Human, Label::Human, Label::Bot, Label::Bot};
  const std::vector<NodeId> humans{x1, x2, h};
  const std::vector<NodeId> bots{b, o, y};
  const MarginRecord r = mine_nearest(geo, g, b, pred, humans, bots, sharp());
  EXPECT_EQ(r.nearest_human, h);
  EXPECT_LT(r.margin, 0.0);
  EXPECT_DOUBLE_EQ(r.margin, r.d_hum - r.d_bot);
  EXPECT_TRUE(r.mislabeled);
}

TEST(Geometry, TiesGoToLowerId) {
  // Two humans with identical neighborhoods are equidistant from v.
  DirectedSocialGraph g(fixture::kContentDim);
  const NodeId x = add(g, Label::Human, 0.5, 1.0);
  const NodeId h1 = add(g, Label::Human, 0.5, 1.0);
  const NodeId h2 = add(g, Label::Human, 0.5, 1.0);
  const NodeId v = add(g, Label::Bot, 0.2, 0.0);
  const NodeId w = add(g, Label::Bot, 0.2, 0.0);
  g.add_edge(h2, x);
  g.add_edge(h1, x);
  g.add_edge(v, x);
  g.add_edge(w, v);
  const OtGeometry geo = fixture::small_geometry();
  const std::vector<Label> pred(5, Label::Bot);
  const std::vector<NodeId> humans{h2, h1};
  const std::vector<NodeId> bots{w};
  const MarginRecord r = mine_nearest(geo, g, v, pred, humans, bots, {});
  EXPECT_EQ(r.nearest_human, h1);
}

TEST(Geometry, EmptyBotPoolThrows) {
  fixture::Fixture f = fixture::build(4, 1, 0);
  const OtGeometry geo = fixture::small_geometry();
  const auto pred = fixture::decision_rule().predict_all(f.graph);
  const std::vector<NodeId> bots{f.bots[0]};
  EXPECT_THROW(mine_nearest(geo, f.graph, f.bots[0], pred, f.humans, bots, {}), EmptyPool);
}

TEST(Geometry, BoundaryCandidates) {
  const OtGeometry geo = fixture::small_geometry();
  CandidateParams cp;
  cp.tau_bdry = INFINITY;
  cp.degree_cap = 2;

  fixture::Fixture perfect = fixture::build(8, 8, 0);
  const auto p0 = fixture::decision_rule().predict_all(perfect.graph);
  std::vector<NodeId> all_bots = perfect.bots;
  EXPECT_TRUE(boundary_candidates(geo, perfect.graph, p0, perfect.humans, all_bots, cp, {}, nullptr).empty());

  fixture::Fixture one = fixture::build(8, 8, 1);
  const auto p1 = fixture::decision_rule().predict_all(one.graph);
  std::vector<NodeId> bots1 = one.bots;
  bots1.push_back(one.cloaks[0]);
  const auto c1 = boundary_candidates(geo, one.graph, p1, one.humans, bots1, cp, {}, nullptr);
  ASSERT_EQ(c1.size(), 1u);
  EXPECT_EQ(c1[0].node, one.cloaks[0]);
  EXPECT_EQ(c1[0].rank, 0u);

  fixture::Fixture two = fixture::build(8, 8, 2);
  const auto p2 = fixture::decision_rule().predict_all(two.graph);
  std::vector<NodeId> bots2 = two.bots;
  bots2.insert(bots2.end(), two.cloaks.begin(), two.cloaks.end());
  const auto c2 = boundary_candidates(geo, two.graph, p2, two.humans, bots2, cp, {}, nullptr);
  ASSERT_EQ(c2.size(), 2u);
  EXPECT_LE(c2[0].margin, c2[1].margin);
  EXPECT_EQ(c2[1].rank, 1u);

  cp.degree_cap = 1;
  EXPECT_TRUE(boundary_candidates(geo, two.graph, p2, two.humans, bots2, cp, {}, nullptr).empty());
  cp.degree_cap = 2;
  cp.tau_bdry = std::min(c2[0].margin, c2[1].margin) - 1.0;
  EXPECT_TRUE(boundary_candidates(geo, two.graph, p2, two.humans, bots2, cp, {}, nullptr).empty());
}

}  // namespace
}  // namespace otcloak
