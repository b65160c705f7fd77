#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "otcloak/datagen.hpp"
#include "otcloak/errors.hpp"
#include "otcloak/training.hpp"

namespace otcloak {
namespace {

Vector atom(double deg_in, double deg_out, double age) {
  Vector a(layout::feature_dim(1), 0.0);
  a[layout::kDegIn] = deg_in;
  a[layout::kDegOut] = deg_out;
  a[layout::age_index(a.size())] = age;
  return a;
}

NeighborMeasure measure_of(std::vector<Vector> atoms) {
  NeighborMeasure mu;
  for (std::size_t i = 0; i < atoms.size(); ++i) mu.atoms.push_back({node_id(i), std::move(atoms[i])});
  mu.weights.assign(mu.atoms.size(), 1.0 / static_cast<double>(mu.atoms.size()));
  return mu;
}

TEST(Losses, Bce) {
  EXPECT_NEAR(loss_bce(0.0, 1, 0.01), std::log(2.0), 1e-15);
  EXPECT_NEAR(loss_bce(1e3, 0, 0.01), 0.0, 1e-11);
  EXPECT_NEAR(loss_bce(1e3, 1, 0.01), -std::log(1e-12), 1e-9);
  EXPECT_GE(loss_bce(-0.3, 0, 0.1), 0.0);
}

TEST(Losses, BceGradientMatchesFiniteDifferences) {
  for (int y : {0, 1}) {
    for (double m : {-0.05, -0.01, 0.0, 0.004, 0.03}) {
      auto f = [&](const std::vector<double>& x) { return loss_bce(x[0], y, 0.02); };
      const double fd = oracle::central_difference(f, {m}, 1e-7)[0];
      EXPECT_NEAR(loss_bce_grad(m, y, 0.02), fd, 1e-5 * (1 + std::abs(fd))) << y << " " << m;
    }
  }
}

TEST(Losses, Sparsity) {
  Matrix perm(2, 2);
  perm(0, 1) = perm(1, 0) = 0.5;
  EXPECT_EQ(loss_sparsity(perm), 0.0);
  EXPECT_NEAR(loss_sparsity(Matrix(2, 2, 0.25)), 2.0 * std::log(2.0), 1e-15);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 20; ++k) {
    Matrix p(3, 4);
    double t = 0;
    for (auto& x : p.values()) t += (x = u(rng));
    for (auto& x : p.values()) x /= t;
    EXPECT_GE(loss_sparsity(p), 0.0);
  }
}

TEST(Losses, PlausibilityCost) {
  const Vector a = atom(1, 2, 0.4);
  EXPECT_EQ(plausibility_cost(a, a, 0.8, 0.2), 0.0);
  EXPECT_NEAR(plausibility_cost(a, atom(3, 2, 0.4), 0.8, 0.2), 1.6, 1e-15);
  EXPECT_EQ(plausibility_cost(a, atom(9, 0, 1.0), 0.0, 0.0), 0.0);
  EXPECT_THROW(plausibility_cost(a, Vector(3, 0.0), 0.8, 0.2), ShapeError);
}

TEST(Losses, PlausibilityLoss) {
  const auto one_a = measure_of({atom(0, 0, 0.0)});
  const auto one_b = measure_of({atom(2, 1, 0.0)});
  EXPECT_DOUBLE_EQ(loss_plausibility(Matrix(1, 1, 1.0), one_a, one_b, 1.0, 0.0), 3.0);
  EXPECT_EQ(loss_plausibility(Matrix(1, 1, 1.0), one_a, one_a, 0.8, 0.2), 0.0);

  const auto a = measure_of({atom(1, 0, 0.1), atom(4, 2, 0.9)});
  const auto b = measure_of({atom(0, 3, 0.5), atom(2, 2, 0.2)});
  Matrix p(2, 2);
  p(0, 0) = 0.1;
  p(0, 1) = 0.4;
  p(1, 0) = 0.3;
  p(1, 1) = 0.2;
  double want = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const auto& x = a.atoms[i].feat;
      const auto& y = b.atoms[j].feat;
      const double dx = x[1] + x[2], dy = y[1] + y[2];
      want += p(i, j) * (0.8 * std::abs(dx - dy) + 0.2 * std::abs(x[5] - y[5]));
    }
  }
  EXPECT_NEAR(loss_plausibility(p, a, b, 0.8, 0.2), want, 1e-15);
  EXPECT_THROW(loss_plausibility(Matrix(3, 2), a, b, 0.8, 0.2), ShapeError);
}

TEST(Pools, SizeOneAndDeterminism) {
  const fixture::Fixture f = fixture::build();
  const NodePools one = sample_pools(f.graph, 1, 1, 5);
  ASSERT_EQ(one.humans.size(), 1u);
  ASSERT_EQ(one.bots.size(), 1u);
  const auto pred = fixture::decision_rule().predict_all(f.graph);
  const OtGeometry geo = fixture::small_geometry();
  const NodeId v = f.cloaks[0];
  NodePools pools = one;
  if (pools.bots[0] == v) pools.bots[0] = f.bots[0];
  const MarginRecord r = mine_nearest(geo, f.graph, v, pred, pools.humans, pools.bots, {});
  EXPECT_EQ(r.nearest_human, pools.humans[0]);
  EXPECT_EQ(r.nearest_bot, pools.bots[0]);

  const NodePools a = sample_pools(f.graph, 3, 4, 9);
  const NodePools b = sample_pools(f.graph, 3, 4, 9);
  EXPECT_EQ(a.humans, b.humans);
  EXPECT_EQ(a.bots, b.bots);
  EXPECT_TRUE(std::is_sorted(a.humans.begin(), a.humans.end()));
}

struct SmallGraph {
  GeneratedGraph gen;
  std::vector<Label> predictions;
};

SmallGraph thirty_nodes() {
  GenParams p;
  p.n_humans = 15;
  p.n_bots = 15;
  p.human_mean_degree = 4.0;
  p.bot_mean_degree = 1.5;
  p.content_dim = 2;
  p.camouflage_fraction = 0.1;
  p.seed = 3;
  SmallGraph s{generate(p), {}};
  s.predictions = FixtureDetector::fit(s.gen.graph).predict_all(s.gen.graph);
  return s;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.hidden_dim = 16;
  cfg.embed_dim = 8;
  cfg.batch_size = 8;
  cfg.seed = 4;
  return cfg;
}

TEST(Trainer, ZeroEpochsKeepsInitialization) {
  const auto s = thirty_nodes();
  TrainConfig cfg = small_config();
  cfg.epochs = 0;
  const TrainResult r = train_geometry(s.gen.graph, s.predictions, cfg);
  const OtGeometry init = init_geometry(layout::feature_dim(2), 16, 8, 4);
  EXPECT_EQ(r.geometry.w1, init.w1);
  EXPECT_EQ(r.geometry.w2, init.w2);
  EXPECT_EQ(r.geometry.l, init.l);
  EXPECT_TRUE(r.history.empty());
}

TEST(Trainer, ZeroWeightsLeaveParametersUnchanged) {
  const auto s = thirty_nodes();
  TrainConfig cfg = small_config();
  cfg.epochs = 3;
  cfg.lambda_bce = cfg.lambda_sp = cfg.lambda_pl = 0.0;
  const TrainResult r = train_geometry(s.gen.graph, s.predictions, cfg);
  const OtGeometry init = init_geometry(layout::feature_dim(2), 16, 8, 4);
  EXPECT_EQ(r.geometry.w1, init.w1);
  EXPECT_EQ(r.geometry.b2, init.b2);
  EXPECT_EQ(r.geometry.l, init.l);
  EXPECT_EQ(r.history.size(), 3u);
}

TEST(Trainer, LossDecreasesOnSmallGraph) {
  const auto s = thirty_nodes();
  TrainConfig cfg = small_config();
  cfg.evaluate_endpoints = true;
  std::ostringstream log;
  const TrainResult r = train_geometry(s.gen.graph, s.predictions, cfg, &log);
  ASSERT_EQ(r.history.size(), 20u);
  EXPECT_LE(r.history.back().total, r.history.front().total);
  EXPECT_LE(r.final_loss->total, r.initial_loss->total);

  std::istringstream lines(log.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["epoch"].get<std::size_t>(), n++);
    EXPECT_TRUE(j.contains("loss_total"));
  }
  EXPECT_EQ(n, 20u);
}

TEST(Trainer, IsDeterministic) {
  const auto s = thirty_nodes();
  TrainConfig cfg = small_config();
  cfg.epochs = 4;
  EXPECT_EQ(train_geometry(s.gen.graph, s.predictions, cfg).geometry,
            train_geometry(s.gen.graph, s.predictions, cfg).geometry);
}

TEST(Trainer, RejectsGraphWithoutConnectedBots) {
  DirectedSocialGraph g(1);
  for (Label l : {Label::Human, Label::Human, Label::Bot}) {
    NodeRecord r;
    r.label = l;
    r.content = {0.0};
    g.add_node(r);
  }
  g.add_edge(node_id(0), node_id(1));
  const std::vector<Label> pred{Label::Human, Label::Human, Label::Bot};
  EXPECT_THROW(train_geometry(g, pred, small_config()), EmptyTrainingSet);
  TrainConfig bad = small_config();
  bad.tau_bce = 0.0;
  EXPECT_THROW(train_geometry(g, pred, bad), InvalidParams);
}

}  // namespace
}  // namespace otcloak
