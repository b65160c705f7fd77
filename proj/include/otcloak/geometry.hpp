#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <utility>
#include <vector>

#include "otcloak/cost_model.hpp"
#include "otcloak/features.hpp"
#include "otcloak/graph.hpp"
#include "otcloak/ot.hpp"

namespace otcloak {

/// A node's neighborhood measure together with the projections L h(z) of
/// its atoms under one geometry.
struct NodeEmbedding {
  NeighborMeasure measure;
  std::vector<Vector> projections;
};

/// Memo of per-node embeddings and pairwise OT distances.
///
/// Entries are tagged with the graph revision they were computed at and are
/// dropped as soon as a query arrives for a different revision. A cache is
/// bound to a single geometry and measure configuration; call `clear()`
/// after changing either. Lookups take a shared lock, inserts an exclusive
/// one.
class DistanceCache {
 public:
  explicit DistanceCache(bool enabled = true) : enabled_(enabled) {}

  DistanceCache(const DistanceCache&) = delete;
  DistanceCache& operator=(const DistanceCache&) = delete;

  bool enabled() const noexcept { return enabled_; }
  std::size_t hits() const noexcept { return hits_.load(); }
  std::size_t misses() const noexcept { return misses_.load(); }
  std::size_t size() const;
  void clear();

  std::shared_ptr<const NodeEmbedding> find_node(std::uint64_t revision, NodeId v) const;
  void store_node(std::uint64_t revision, NodeId v, std::shared_ptr<const NodeEmbedding> entry);

  std::optional<double> find_distance(std::uint64_t revision, NodeId v, NodeId xi) const;
  void store_distance(std::uint64_t revision, NodeId v, NodeId xi, double d);

 private:
  void sync(std::uint64_t revision);

  bool enabled_;
  mutable std::shared_mutex mutex_;
  std::uint64_t revision_ = std::numeric_limits<std::uint64_t>::max();
  std::map<NodeId, std::shared_ptr<const NodeEmbedding>> nodes_;
  std::map<std::pair<NodeId, NodeId>, double> distances_;
  mutable std::atomic<std::size_t> hits_{0};
  mutable std::atomic<std::size_t> misses_{0};
};

/// Shared knobs of every distance query.
struct DistanceParams {
  SinkhornConfig sinkhorn;
  MeasureParams measure;
};

/// Measure and projections of v (cached when `cache` is non-null).
std::shared_ptr<const NodeEmbedding> node_embedding(const OtGeometry& geo,
                                                    const DirectedSocialGraph& g, NodeId v,
                                                    const MeasureParams& mp, DistanceCache* cache);

/// Everything produced by one pairwise solve.
struct PairSolve {
  std::shared_ptr<const NodeEmbedding> source;
  std::shared_ptr<const NodeEmbedding> target;
  CostMatrix cost;
  TransportPlan plan;
  double distance = 0.0;  // <P, C>
};

PairSolve solve_pair(const OtGeometry& geo, const DirectedSocialGraph& g, NodeId v, NodeId xi,
                     const DistanceParams& params, DistanceCache* cache = nullptr);

/// D(v, xi) = <P*, C> between the two neighborhood measures.
/// Throws EmptyNeighborhood when either node is isolated.
double ot_distance(const OtGeometry& geo, const DirectedSocialGraph& g, NodeId v, NodeId xi,
                   const DistanceParams& params, DistanceCache* cache = nullptr);

/// Result of nearest-neighbor mining for one bot.
struct MarginRecord {
  NodeId node{};
  double d_hum = 0.0;
  double d_bot = 0.0;
  double margin = 0.0;  // d_hum - d_bot
  NodeId nearest_human{};
  NodeId nearest_bot{};
  bool mislabeled = false;  // predicted human
};

/// Delegates to `mine_nearest` with the cache attached.
MarginRecord margin(const OtGeometry& geo, const DirectedSocialGraph& g, NodeId v,
                    std::span<const Label> predictions, std::span<const NodeId> humans,
                    std::span<const NodeId> bots, const DistanceParams& params,
                    DistanceCache* cache);

struct CloakCandidate {
  NodeId node{};
  double margin = 0.0;
  std::size_t rank = 0;

  friend bool operator==(const CloakCandidate&, const CloakCandidate&) = default;
};

inline constexpr std::size_t kDefaultTopBoundary = 50;

struct CandidateParams {
  double tau_bdry = 0.1;
  std::size_t degree_cap = 1;
  std::size_t top_n = kDefaultTopBoundary;  // 0 keeps every candidate
};

/// Misclassified true bots with total degree in [1, degree_cap] and margin
/// <= tau_bdry, sorted by ascending margin (ties by NodeId) and truncated to
/// top_n. Isolated bots have no measure and are skipped.
std::vector<CloakCandidate> boundary_candidates(const OtGeometry& geo, const DirectedSocialGraph& g,
                                                std::span<const Label> predictions,
                                                std::span<const NodeId> humans,
                                                std::span<const NodeId> bots,
                                                const CandidateParams& cp,
                                                const DistanceParams& params,
                                                DistanceCache* cache);

}  // namespace otcloak
