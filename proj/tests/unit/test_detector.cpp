#include <cmath>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "otcloak/detector.hpp"
#include "otcloak/errors.hpp"

namespace otcloak {
namespace {

using fixture::add;

// Isolated bots and a human clique with distinct ages and content.
DirectedSocialGraph separable(std::size_t n = 12) {
  DirectedSocialGraph g(fixture::kContentDim);
  std::vector<NodeId> humans;
  for (std::size_t i = 0; i < n; ++i) humans.push_back(add(g, Label::Human, 0.8, 1.0));
  for (std::size_t i = 0; i < n; ++i) add(g, Label::Bot, 0.1, -1.0);
  for (NodeId a : humans)
    for (NodeId b : humans)
      if (a != b) g.add_edge(a, b);
  g.snapshot_baseline();
  return g;
}

DetectorConfig quick(std::size_t epochs = 150) {
  DetectorConfig cfg;
  cfg.hidden_dim = 8;
  cfg.epochs = epochs;
  cfg.learning_rate = 0.05;
  cfg.seed = 2;
  return cfg;
}

TEST(DetectorInput, BucketsAgeAndContent) {
  DirectedSocialGraph g(fixture::kContentDim);
  const NodeId v = add(g, Label::Bot, 0.25, 2.0);
  const NodeId u = add(g, Label::Human, 0.5, 1.0);
  const NodeId w = add(g, Label::Human, 0.5, 1.0);
  g.add_edge(v, u);
  g.add_edge(v, w);
  g.add_edge(u, v);
  const Vector x = detector_input(g, v);
  ASSERT_EQ(x.size(), detector_input_dim(fixture::kContentDim));
  // In-degree 1 lands in bucket 1, out-degree 2 in bucket 2.
  EXPECT_EQ(x[1], 1.0);
  EXPECT_EQ(x[kDegreeBuckets + 2], 1.0);
  double ones = 0.0;
  for (std::size_t i = 0; i < 2 * kDegreeBuckets; ++i) ones += x[i];
  EXPECT_EQ(ones, 2.0);
  EXPECT_EQ(x[2 * kDegreeBuckets], 0.25);
  EXPECT_EQ(x[2 * kDegreeBuckets + 1], 2.0);
  EXPECT_EQ(x[2 * kDegreeBuckets + 2], -2.0);
}

TEST(Detector, ZeroEpochsIsDeterministic) {
  const auto g = separable();
  const auto a = train_detector(g, quick(0));
  const auto b = train_detector(g, quick(0));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.predict_all(g), b.predict_all(g));
}

TEST(Detector, LearnsSeparableGraph) {
  const auto g = separable();
  const auto det = train_detector(g, quick());
  EXPECT_GE(accuracy(g, det.predict_all(g)), 0.95);
  EXPECT_EQ(det.metadata().epochs, 150u);
  EXPECT_EQ(det.name(), "message-passing");
}

TEST(Detector, SameSeedSamePredictions) {
  const auto g = separable();
  const auto a = train_detector(g, quick(30));
  const auto b = train_detector(g, quick(30));
  EXPECT_EQ(a, b);
  const auto pa = a.infer(g);
  const auto pb = b.infer(g);
  EXPECT_EQ(pa.labels, pb.labels);
  EXPECT_EQ(pa.prob_bot, pb.prob_bot);
}

TEST(Detector, SingleClassSplitThrows) {
  DirectedSocialGraph g(fixture::kContentDim);
  for (int i = 0; i < 6; ++i) add(g, Label::Human, 0.5, 1.0);
  EXPECT_THROW(train_detector(g, quick(5)), DegenerateSplit);
}

TEST(Detector, LabelsInjectedNodeAndUndoRestores) {
  auto g = separable();
  const auto det = train_detector(g, quick(60));
  const auto before = det.predict_all(g);

  const NodeId fresh = add(g, Label::Bot, 0.0, 0.0);
  const Label l = det.predict(g, fresh);
  EXPECT_TRUE(l == Label::Bot || l == Label::Human);

  g.reset_to_baseline();
  const NodeId v = node_id(0);
  const NodeId b = node_id(13);
  const EditSet add_one{v, {{EditOp::Add, b, v, kFollow}}};
  ASSERT_EQ(apply_edits(g, add_one).applied, 1u);
  apply_edits(g, inverse(add_one));
  EXPECT_EQ(det.predict_all(g), before);
}

TEST(Detector, LocalScoreAgreesWithFullPass) {
  const fixture::Fixture f = fixture::build();
  const auto det = train_detector(f.graph, quick(40));
  const auto full = det.infer(f.graph);
  for (std::size_t i = 0; i < f.graph.node_count(); ++i) {
    const double s = det.local_score(f.graph, node_id(i));
    const double p = 1.0 / (1.0 + std::exp(-s));
    EXPECT_NEAR(p, full.prob_bot[i], 1e-10);
    EXPECT_EQ(det.predict(f.graph, node_id(i)), full.labels[i]);
  }
}

TEST(FixtureDetector, CentroidRule) {
  fixture::Fixture f = fixture::build();
  const auto rule = fixture::decision_rule();
  for (NodeId h : f.humans) EXPECT_EQ(rule.predict(f.graph, h), Label::Human);
  for (NodeId b : f.bots) EXPECT_EQ(rule.predict(f.graph, b), Label::Bot);
  for (NodeId c : f.cloaks) EXPECT_EQ(rule.predict(f.graph, c), Label::Human);

  // Cloning a human's out-edges onto a bot flips it.
  const NodeId b = f.bots[0];
  EditSet clone{b, {}};
  for (const auto& n : f.graph.out_neighbors(f.humans[4])) clone.edits.push_back({EditOp::Add, b, n.node, kFollow});
  apply_edits(f.graph, clone);
  EXPECT_EQ(rule.predict(f.graph, b), Label::Human);
  EXPECT_EQ(FixtureDetector::stats(f.graph, b)[0], 3.0);
}

TEST(FixtureDetector, FitUsesClassMeans) {
  DirectedSocialGraph g(fixture::kContentDim);
  const NodeId h1 = add(g, Label::Human, 0.5, 1.0);
  const NodeId h2 = add(g, Label::Human, 0.5, 1.0);
  const NodeId b = add(g, Label::Bot, 0.1, 0.0);
  g.add_edge(h1, h2);
  g.add_edge(b, h1);
  const auto det = FixtureDetector::fit(g);
  // Humans: (out_h, out_b, in_h, in_b) = (1,0,0,1) and (0,0,1,0).
  EXPECT_EQ(det.human_centroid(), (FixtureDetector::Stats{0.5, 0.0, 0.5, 0.5}));
  EXPECT_EQ(det.bot_centroid(), (FixtureDetector::Stats{1.0, 0.0, 0.0, 0.0}));
}

class DetectorFile : public ::testing::Test {
 protected:
  std::filesystem::path path =
      std::filesystem::temp_directory_path() / ("otcloak_det_" + std::to_string(::getpid()) + ".bin");
  void TearDown() override { std::filesystem::remove(path); }
};

TEST_F(DetectorFile, RoundTripAndCorruption) {
  const auto g = separable(6);
  const auto det = train_detector(g, quick(10));
  save_detector(det, path);
  const auto back = load_detector(path);
  EXPECT_EQ(back, det);
  EXPECT_EQ(back.predict_all(g), det.predict_all(g));

  std::ofstream(path, std::ios::binary | std::ios::trunc) << "BOTDET1";
  EXPECT_THROW(load_detector(path), FormatError);
  EXPECT_THROW(load_detector(path.string() + ".missing"), FormatError);
}

}  // namespace
}  // namespace otcloak
