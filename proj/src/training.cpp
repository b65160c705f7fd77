#include "otcloak/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <tuple>

#include <json.hpp>

#include "otcloak/errors.hpp"
#include "otcloak/features.hpp"
#include "otcloak/kernels.hpp"
#include "otcloak/log.hpp"

namespace otcloak {
namespace {

constexpr double kProbClamp = 1e-12;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<NodeId> subsample(std::vector<NodeId> nodes, std::size_t cap, std::mt19937_64& rng) {
  if (nodes.size() > cap) {
    // Partial Fisher-Yates over the first `cap` slots.
    for (std::size_t i = 0; i < cap; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, nodes.size() - 1);
      std::swap(nodes[i], nodes[pick(rng)]);
    }
    nodes.resize(cap);
  }
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

std::vector<NodeId> non_isolated(const DirectedSocialGraph& g, Label label) {
  std::vector<NodeId> out;
  for (NodeId v : g.nodes_with_label(label)) {
    if (degree_stats(g, v).total() > 0) out.push_back(v);
  }
  return out;
}

// Nearest member of `pool` (v excluded); ties resolve to the lower NodeId.
std::pair<NodeId, double> nearest(const OtGeometry& geo, const DirectedSocialGraph& g, NodeId v,
                                  std::span<const NodeId> pool, const DistanceParams& params,
                                  DistanceCache* cache, const char* what) {
  bool found = false;
  NodeId best{};
  double best_d = 0.0;
  for (NodeId x : pool) {
    if (x == v || degree_stats(g, x).total() == 0) continue;
    const double d = ot_distance(geo, g, v, x, params, cache);
    if (!found || d < best_d || (d == best_d && x < best)) {
      found = true;
      best = x;
      best_d = d;
    }
  }
  if (!found) throw EmptyPool(std::string("no usable ") + what + " in the pool");
  return {best, best_d};
}

Matrix plausibility_matrix(const NeighborMeasure& a, const NeighborMeasure& b, double alpha_deg,
                           double alpha_age) {
  Matrix phi(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      phi(i, j) = plausibility_cost(a.atoms[i].feat, b.atoms[j].feat, alpha_deg, alpha_age);
    }
  }
  return phi;
}

std::vector<Vector> atom_features(const NeighborMeasure& mu) {
  std::vector<Vector> out;
  out.reserve(mu.size());
  for (const auto& atom : mu.atoms) out.push_back(atom.feat);
  return out;
}

struct BotLoss {
  double bce = 0.0;
  double sp = 0.0;
  double pl = 0.0;
};

// Adds dL/dC of both pairs to `grads` (through the cost network) and returns
// the unweighted loss terms.
BotLoss accumulate_bot(const OtGeometry& geo, const DirectedSocialGraph& g, NodeId v,
                       std::span<const Label> predictions, const NodePools& pools,
                       const TrainConfig& cfg, DistanceCache& cache, CostGradients& grads) {
  const MarginRecord rec =
      mine_nearest(geo, g, v, predictions, pools.humans, pools.bots, cfg.distance, &cache);
  const PairSolve hum = solve_pair(geo, g, v, rec.nearest_human, cfg.distance, &cache);
  const PairSolve bot = solve_pair(geo, g, v, rec.nearest_bot, cfg.distance, &cache);
  const int y = rec.mislabeled ? 1 : 0;

  const Matrix& ph = hum.plan.plan;
  const Matrix phi = plausibility_matrix(hum.source->measure, hum.target->measure, cfg.alpha_deg_pl,
                                         cfg.alpha_age_pl);
  BotLoss loss;
  loss.bce = loss_bce(rec.margin, y, cfg.tau_bce);
  loss.sp = loss_sparsity(ph);
  loss.pl = transport_cost(ph, phi);

  // Envelope route: dD/dC = P* with the plans held fixed, so the sparsity
  // and plausibility terms carry no cost gradient.
  const double g_m = cfg.lambda_bce * loss_bce_grad(rec.margin, y, cfg.tau_bce);
  Matrix up_h(ph.rows(), ph.cols());
  kernels::axpy(g_m, ph.values(), up_h.values());
  const Matrix& pb = bot.plan.plan;
  Matrix up_b(pb.rows(), pb.cols());
  kernels::axpy(-g_m, pb.values(), up_b.values());

  const auto za = atom_features(hum.source->measure);
  backward_matrix(geo, za, atom_features(hum.target->measure), up_h, grads);
  backward_matrix(geo, za, atom_features(bot.target->measure), up_b, grads);
  return loss;
}

}  // namespace

void TrainConfig::validate() const {
  if (lambda_bce < 0.0 || lambda_sp < 0.0 || lambda_pl < 0.0) {
    throw InvalidParams("loss weights must be nonnegative");
  }
  if (!(tau_bce > 0.0)) throw InvalidParams("tau_bce must be positive");
  if (batch_size == 0) throw InvalidParams("batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw InvalidParams("learning_rate must be nonnegative");
  if (human_pool_size == 0 || bot_pool_size == 0) throw InvalidParams("pool sizes must be positive");
  if (!(distance.sinkhorn.epsilon > 0.0)) throw InvalidParams("epsilon must be positive");
}

NodePools sample_pools(const DirectedSocialGraph& g, std::size_t human_cap, std::size_t bot_cap,
                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NodePools pools;
  pools.humans = subsample(non_isolated(g, Label::Human), human_cap, rng);
  pools.bots = subsample(non_isolated(g, Label::Bot), bot_cap, rng);
  return pools;
}

MarginRecord mine_nearest(const OtGeometry& geo, const DirectedSocialGraph& g, NodeId v,
                          std::span<const Label> predictions, std::span<const NodeId> humans,
                          std::span<const NodeId> bots, const DistanceParams& params,
                          DistanceCache* cache) {
  g.require(v);
  if (degree_stats(g, v).total() == 0) {
    throw EmptyNeighborhood("node " + std::to_string(index_of(v)) + " has no neighbors");
  }
  MarginRecord rec;
  rec.node = v;
  std::tie(rec.nearest_human, rec.d_hum) = nearest(geo, g, v, humans, params, cache, "human");
  std::tie(rec.nearest_bot, rec.d_bot) = nearest(geo, g, v, bots, params, cache, "bot");
  rec.margin = rec.d_hum - rec.d_bot;
  rec.mislabeled = index_of(v) < predictions.size() && predictions[index_of(v)] == Label::Human;
  return rec;
}

double loss_bce(double margin, int y, double tau_bce) {
  const double p = std::clamp(sigmoid(-margin / tau_bce), kProbClamp, 1.0 - kProbClamp);
  return y == 1 ? -std::log(p) : -std::log(1.0 - p);
}

double loss_bce_grad(double margin, int y, double tau_bce) {
  return (static_cast<double>(y) - sigmoid(-margin / tau_bce)) / tau_bce;
}

double loss_sparsity(const Matrix& plan) {
  const auto h = conditional_entropies(plan);
  return h.row + h.col;
}

double plausibility_cost(std::span<const double> atom_i, std::span<const double> atom_j,
                         double alpha_deg, double alpha_age) {
  if (atom_i.size() != atom_j.size() || atom_i.size() < layout::kContent + 2) {
    throw ShapeError("plausibility cost needs two atoms of the same layout");
  }
  const double deg_i = atom_i[layout::kDegIn] + atom_i[layout::kDegOut];
  const double deg_j = atom_j[layout::kDegIn] + atom_j[layout::kDegOut];
  const std::size_t age = layout::age_index(atom_i.size());
  return alpha_deg * std::abs(deg_i - deg_j) + alpha_age * std::abs(atom_i[age] - atom_j[age]);
}

double loss_plausibility(const Matrix& plan, const NeighborMeasure& mu_a,
                         const NeighborMeasure& mu_b, double alpha_deg, double alpha_age) {
  if (plan.rows() != mu_a.size() || plan.cols() != mu_b.size()) {
    throw ShapeError("plan shape does not match the measures");
  }
  return transport_cost(plan, plausibility_matrix(mu_a, mu_b, alpha_deg, alpha_age));
}

EpochLoss evaluate_losses(const OtGeometry& geo, const DirectedSocialGraph& g,
                          std::span<const Label> predictions, const NodePools& pools,
                          const TrainConfig& cfg) {
  if (predictions.size() < g.node_count()) throw ShapeError("prediction vector too short");
  const std::vector<NodeId> eligible = non_isolated(g, Label::Bot);
  if (eligible.empty()) throw EmptyTrainingSet("no bot with a nonempty neighborhood");
  DistanceCache cache;
  CostGradients scratch = CostGradients::zeros_like(geo);
  EpochLoss out;
  for (NodeId v : eligible) {
    const BotLoss l = accumulate_bot(geo, g, v, predictions, pools, cfg, cache, scratch);
    out.bce += l.bce;
    out.sp += l.sp;
    out.pl += l.pl;
  }
  const double inv = 1.0 / static_cast<double>(eligible.size());
  out.bce *= inv;
  out.sp *= inv;
  out.pl *= inv;
  out.total = cfg.lambda_bce * out.bce + cfg.lambda_sp * out.sp + cfg.lambda_pl * out.pl;
  return out;
}

TrainResult train_geometry(const DirectedSocialGraph& g, std::span<const Label> predictions,
                           const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (predictions.size() < g.node_count()) throw ShapeError("prediction vector too short");

  TrainResult result;
  result.geometry = init_geometry(layout::feature_dim(g.content_dim()), cfg.hidden_dim,
                                  cfg.embed_dim, cfg.seed);
  OtGeometry& geo = result.geometry;

  std::vector<Vector> samples;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const NodeId v = node_id(i);
    if (degree_stats(g, v).total() == 0) continue;
    for (auto& atom : neighborhood_measure(g, v, cfg.distance.measure).atoms) {
      samples.push_back(std::move(atom.feat));
    }
  }
  fit_standardization(geo, samples);

  std::vector<NodeId> eligible = non_isolated(g, Label::Bot);
  if (eligible.empty()) throw EmptyTrainingSet("no bot with a nonempty neighborhood");
  result.pools = sample_pools(g, cfg.human_pool_size, cfg.bot_pool_size, cfg.seed + 1);
  if (cfg.evaluate_endpoints) result.initial_loss = evaluate_losses(geo, g, predictions, result.pools, cfg);

  std::mt19937_64 rng(cfg.seed + 2);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(eligible.begin(), eligible.end(), rng);
    EpochLoss ep;
    ep.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < eligible.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, eligible.size());
      DistanceCache cache;
      CostGradients grads = CostGradients::zeros_like(geo);
      BotLoss sum;
      for (std::size_t k = start; k < stop; ++k) {
        const BotLoss l =
            accumulate_bot(geo, g, eligible[k], predictions, result.pools, cfg, cache, grads);
        sum.bce += l.bce;
        sum.sp += l.sp;
        sum.pl += l.pl;
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      ep.bce += sum.bce * inv;
      ep.sp += sum.sp * inv;
      ep.pl += sum.pl * inv;
      CostGradients mean = CostGradients::zeros_like(geo);
      mean.add_scaled(grads, inv);
      otcloak::log().debug("batch gradient norm {:.6g}", std::sqrt(mean.squared_norm()));
      gradient_step(geo, mean, cfg.learning_rate);
      ++batches;
    }
    const double inv_b = 1.0 / static_cast<double>(batches);
    ep.bce *= inv_b;
    ep.sp *= inv_b;
    ep.pl *= inv_b;
    ep.total = cfg.lambda_bce * ep.bce + cfg.lambda_sp * ep.sp + cfg.lambda_pl * ep.pl;
    otcloak::log().info("epoch {} loss {:.6f} (bce {:.6f}, sp {:.6f}, pl {:.6f})", epoch, ep.total,
                        ep.bce, ep.sp, ep.pl);
    if (log) {
      nlohmann::ordered_json j{{"epoch", ep.epoch},  {"loss_total", ep.total},
                               {"loss_bce", ep.bce}, {"loss_sp", ep.sp},
                               {"loss_pl", ep.pl}};
      *log << j.dump() << '\n';
    }
    result.history.push_back(ep);
  }
  if (cfg.evaluate_endpoints) result.final_loss = evaluate_losses(geo, g, predictions, result.pools, cfg);
  return result;
}

}  // namespace otcloak
