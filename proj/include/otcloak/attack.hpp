#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "otcloak/cloak_sampler.hpp"
#include "otcloak/cost_model.hpp"
#include "otcloak/detector.hpp"
#include "otcloak/geometry.hpp"
#include "otcloak/graph.hpp"
#include "otcloak/training.hpp"

namespace otcloak {

struct AttackConfig {
  std::size_t budget_delta = 1;
  /// Outgoing-neighbor restriction size; unset means budget_delta, 0 disables.
  std::optional<std::size_t> top_k;
  std::size_t reuse_cap = 3;
  bool flag_hb = true;
  std::size_t trials = 50;
  DistanceParams distance;
  double tau_bdry = 0.1;
  /// Maximum cloak degree; unset means budget_delta.
  std::optional<std::size_t> degree_cap;
  std::size_t top_boundary = kDefaultTopBoundary;
  bool reset_on_saturation = false;
  /// Edited and injected targets get an age drawn from [0, fresh_age_max].
  double fresh_age_max = 0.1;
  std::uint64_t seed = 0;

  std::size_t effective_top_k() const { return top_k.value_or(budget_delta); }
  std::size_t effective_degree_cap() const { return degree_cap.value_or(budget_delta); }
  void validate() const;
};

enum class Outcome : std::uint8_t { Success, Failure, BudgetExceeded };
const char* to_string(Outcome outcome) noexcept;

enum class Strategy : std::uint8_t { Cloak, HumanFallback, Random };
const char* to_string(Strategy strategy) noexcept;

struct AttackTrace {
  std::size_t trial = 0;
  NodeId target{};
  Strategy strategy = Strategy::Cloak;
  std::optional<NodeId> cloak;
  EditSet edits;
  Outcome outcome = Outcome::Failure;
  Label detector_before = Label::Bot;
  std::optional<Label> detector_after;
};

/// Everything the drivers share. The graph must carry a baseline snapshot;
/// every trial starts from it and the graph is back on it when a driver
/// returns.
struct AttackContext {
  DirectedSocialGraph& graph;
  std::span<const Label> predictions;  // clean-graph detector output
  const OtGeometry& geometry;
  const Detector& detector;
  const NodePools& pools;
  DistanceCache* cache = nullptr;
};

/// Restriction on a cloak's outgoing neighbors; inactive means "no restriction".
struct Restriction {
  bool active = false;
  std::vector<NodeId> allowed;  // ascending
};

/// Row masses of the plan between the cloak and its nearest human, over the
/// rows that are out-neighbors of t; keeps the top_k (ties to lower NodeId).
/// Inactive when epsilon <= 0 or top_k == 0.
Restriction ot_guided_neighbors(const OtGeometry& geo, const DirectedSocialGraph& g, NodeId t,
                                std::span<const NodeId> humans, std::size_t top_k,
                                const DistanceParams& params, DistanceCache* cache = nullptr);

/// Top-k out-neighbor rows by mass given an already solved plan. Exposed for
/// testing the selection rule on explicit plans.
std::vector<NodeId> top_rows_by_mass(const DirectedSocialGraph& g, NodeId t,
                                     const NeighborMeasure& mu_t, const Matrix& plan,
                                     std::size_t top_k);

enum class CloneMode : std::uint8_t { Editing, Injection };

struct ClonePlan {
  EditSet edits;     // deletes (editing mode only) precede adds
  Vector content;    // copied from the cloak
  double age_norm;   // fresh-account age
};

/// Decodes a cloak into target edits without touching the graph. Throws
/// ConstraintViolation if any edit would not be incident to v_tar.
ClonePlan clone_cloak(const DirectedSocialGraph& g, NodeId v_tar, NodeId t,
                      const Restriction& restriction, bool flag_hb, CloneMode mode,
                      double fresh_age);

/// Applies a clone plan (attributes first, then edits).
void apply_clone(DirectedSocialGraph& g, const ClonePlan& plan);

/// Boundary candidates and their sampling distributions, shared by every
/// target of one experiment.
struct CloakPool {
  std::vector<CloakCandidate> candidates;
  std::vector<CloakProfile> profiles;
  SamplingWeights weights;
};

CloakPool prepare_cloaks(const AttackContext& ctx, const AttackConfig& cfg);

/// Node-editing attack on v_tar. Delegates to `human_fallback` when the pool
/// is empty.
std::vector<AttackTrace> bocloak_edit(const AttackContext& ctx, const CloakPool& pool, NodeId v_tar,
                                      const AttackConfig& cfg);

/// Node-injection attack: each trial injects a fresh bot and clones onto it.
/// `injection_index` decorrelates the random streams of different injections.
std::vector<AttackTrace> bocloak_inject(const AttackContext& ctx, const CloakPool& pool,
                                        const AttackConfig& cfg, std::size_t injection_index = 0);

/// Clones the nearest fitting human neighborhoods onto v_tar, skipping
/// humans whose clone would exceed the budget. When v_tar has no
/// neighborhood, humans are ordered by ascending degree instead of distance.
std::vector<AttackTrace> human_fallback(const AttackContext& ctx, NodeId v_tar,
                                        const AttackConfig& cfg, CloneMode mode);

/// Constrained-random baseline: budget_delta uniform feasible adds per
/// trial (target-incident, no human -> target edges).
std::vector<AttackTrace> random_edit(const AttackContext& ctx, NodeId v_tar,
                                     const AttackConfig& cfg);
std::vector<AttackTrace> random_inject(const AttackContext& ctx, const AttackConfig& cfg,
                                       std::size_t injection_index = 0);

/// True when any trace flipped the target.
bool any_success(std::span<const AttackTrace> traces);

/// One JSON object per trace.
void write_traces(std::ostream& out, std::span<const AttackTrace> traces);

}  // namespace otcloak
