#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "otcloak/cost_model.hpp"
#include "otcloak/geometry.hpp"
#include "otcloak/graph.hpp"
#include "otcloak/ot.hpp"

namespace otcloak {

struct TrainConfig {
  double lambda_bce = 2.0;
  double lambda_sp = 0.05;
  double lambda_pl = 0.10;
  double tau_bce = 0.01;
  double tau_bdry = 0.1;
  double alpha_deg_pl = 0.8;
  double alpha_age_pl = 0.2;
  /// Contrastive margin; kept for configuration compatibility, not optimized.
  double gamma = 1e-3;
  std::size_t batch_size = 128;
  std::size_t epochs = 20;
  double learning_rate = 1e-3;
  std::size_t human_pool_size = 200;
  std::size_t bot_pool_size = 200;
  std::size_t hidden_dim = kDefaultHidden;
  std::size_t embed_dim = kDefaultEmbed;
  std::uint64_t seed = 0;
  DistanceParams distance;
  /// Also evaluate the full-pass loss before the first and after the last step.
  bool evaluate_endpoints = false;

  /// Throws InvalidParams on negative weights or a non-positive temperature.
  void validate() const;
};

/// Non-isolated humans and bots, each subsampled (seeded, uniform) to its cap
/// and returned in ascending NodeId order.
struct NodePools {
  std::vector<NodeId> humans;
  std::vector<NodeId> bots;
};

NodePools sample_pools(const DirectedSocialGraph& g, std::size_t human_cap, std::size_t bot_cap,
                       std::uint64_t seed);

/// Nearest human and nearest other bot of v under D; ties go to the lower
/// NodeId. Isolated pool members are skipped. Throws EmptyPool when either
/// pool has no usable member and EmptyNeighborhood when v is isolated.
MarginRecord mine_nearest(const OtGeometry& geo, const DirectedSocialGraph& g, NodeId v,
                          std::span<const Label> predictions, std::span<const NodeId> humans,
                          std::span<const NodeId> bots, const DistanceParams& params,
                          DistanceCache* cache = nullptr);

/// Binary cross-entropy of sigma(-m / tau) against y, with the probability
/// clamped to [1e-12, 1 - 1e-12].
double loss_bce(double margin, int y, double tau_bce);

/// d loss_bce / d margin = (y - sigma(-m / tau)) / tau.
double loss_bce_grad(double margin, int y, double tau_bce);

/// H_row(P) + H_col(P).
double loss_sparsity(const Matrix& plan);

/// alpha_deg |deg_i - deg_j| + alpha_age |age_i - age_j| over the atoms'
/// total degree and age coordinates.
double plausibility_cost(std::span<const double> atom_i, std::span<const double> atom_j,
                         double alpha_deg, double alpha_age);

/// sum_ij P_ij plausibility_cost(i, j). Throws ShapeError on mismatch.
double loss_plausibility(const Matrix& plan, const NeighborMeasure& mu_a,
                         const NeighborMeasure& mu_b, double alpha_deg, double alpha_age);

struct EpochLoss {
  std::size_t epoch = 0;
  double total = 0.0;
  double bce = 0.0;
  double sp = 0.0;
  double pl = 0.0;
};

struct TrainResult {
  OtGeometry geometry;
  std::vector<EpochLoss> history;
  NodePools pools;
  /// Full-pass losses at the initial and final geometry (when requested).
  std::optional<EpochLoss> initial_loss;
  std::optional<EpochLoss> final_loss;
};

/// Mean losses over every eligible bot at a fixed geometry, without a step.
EpochLoss evaluate_losses(const OtGeometry& geo, const DirectedSocialGraph& g,
                          std::span<const Label> predictions, const NodePools& pools,
                          const TrainConfig& cfg);

/// Minibatch gradient descent on the weighted BCE, sparsity and
/// plausibility losses over the eligible (non-isolated) true bots. Losses in
/// the history are batch means taken before each step, averaged over the
/// epoch. When `log` is set, one JSON object per epoch is written to it.
///
/// Throws EmptyTrainingSet when there is no eligible bot.
TrainResult train_geometry(const DirectedSocialGraph& g, std::span<const Label> predictions,
                           const TrainConfig& cfg, std::ostream* log = nullptr);

}  // namespace otcloak
