#include "otcloak/geometry.hpp"

#include <algorithm>
#include <mutex>

#include "otcloak/errors.hpp"
#include "otcloak/training.hpp"

namespace otcloak {

std::size_t DistanceCache::size() const {
  std::shared_lock lock(mutex_);
  return nodes_.size() + distances_.size();
}

void DistanceCache::clear() {
  std::unique_lock lock(mutex_);
  nodes_.clear();
  distances_.clear();
  revision_ = std::numeric_limits<std::uint64_t>::max();
}

void DistanceCache::sync(std::uint64_t revision) {
  if (revision_ != revision) {
    nodes_.clear();
    distances_.clear();
    revision_ = revision;
  }
}

std::shared_ptr<const NodeEmbedding> DistanceCache::find_node(std::uint64_t revision,
                                                              NodeId v) const {
  if (!enabled_) return nullptr;
  std::shared_lock lock(mutex_);
  if (revision_ != revision) return nullptr;
  auto it = nodes_.find(v);
  return it == nodes_.end() ? nullptr : it->second;
}

void DistanceCache::store_node(std::uint64_t revision, NodeId v,
                               std::shared_ptr<const NodeEmbedding> entry) {
  if (!enabled_) return;
  std::unique_lock lock(mutex_);
  sync(revision);
  nodes_.emplace(v, std::move(entry));
}

std::optional<double> DistanceCache::find_distance(std::uint64_t revision, NodeId v,
                                                   NodeId xi) const {
  if (!enabled_) return std::nullopt;
  std::shared_lock lock(mutex_);
  if (revision_ == revision) {
    auto it = distances_.find({v, xi});
    if (it != distances_.end()) {
      ++hits_;
      return it->second;
    }
  }
  ++misses_;
  return std::nullopt;
}

void DistanceCache::store_distance(std::uint64_t revision, NodeId v, NodeId xi, double d) {
  if (!enabled_) return;
  std::unique_lock lock(mutex_);
  sync(revision);
  distances_[{v, xi}] = d;
}

std::shared_ptr<const NodeEmbedding> node_embedding(const OtGeometry& geo,
                                                    const DirectedSocialGraph& g, NodeId v,
                                                    const MeasureParams& mp, DistanceCache* cache) {
  if (cache) {
    if (auto hit = cache->find_node(g.revision(), v)) return hit;
  }
  auto entry = std::make_shared<NodeEmbedding>();
  entry->measure = neighborhood_measure(g, v, mp);
  entry->projections.reserve(entry->measure.size());
  for (const auto& atom : entry->measure.atoms) {
    entry->projections.push_back(project(geo, atom.feat));
  }
  if (cache) cache->store_node(g.revision(), v, entry);
  return entry;
}

PairSolve solve_pair(const OtGeometry& geo, const DirectedSocialGraph& g, NodeId v, NodeId xi,
                     const DistanceParams& params, DistanceCache* cache) {
  PairSolve out;
  out.source = node_embedding(geo, g, v, params.measure, cache);
  out.target = node_embedding(geo, g, xi, params.measure, cache);
  out.cost = cost_matrix_from_projections(out.source->projections, out.target->projections,
                                          out.source->measure.weights, out.target->measure.weights);
  out.plan = sinkhorn(out.cost, params.sinkhorn);
  out.distance = out.plan.transport_cost;
  return out;
}

double ot_distance(const OtGeometry& geo, const DirectedSocialGraph& g, NodeId v, NodeId xi,
                   const DistanceParams& params, DistanceCache* cache) {
  if (cache) {
    if (auto d = cache->find_distance(g.revision(), v, xi)) return *d;
  }
  const double d = solve_pair(geo, g, v, xi, params, cache).distance;
  if (cache) cache->store_distance(g.revision(), v, xi, d);
  return d;
}

MarginRecord margin(const OtGeometry& geo, const DirectedSocialGraph& g, NodeId v,
                    std::span<const Label> predictions, std::span<const NodeId> humans,
                    std::span<const NodeId> bots, const DistanceParams& params,
                    DistanceCache* cache) {
  return mine_nearest(geo, g, v, predictions, humans, bots, params, cache);
}

std::vector<CloakCandidate> boundary_candidates(const OtGeometry& geo, const DirectedSocialGraph& g,
                                                std::span<const Label> predictions,
                                                std::span<const NodeId> humans,
                                                std::span<const NodeId> bots,
                                                const CandidateParams& cp,
                                                const DistanceParams& params,
                                                DistanceCache* cache) {
  if (predictions.size() < g.node_count()) throw ShapeError("prediction vector too short");
  std::vector<CloakCandidate> out;
  for (NodeId b : g.nodes_with_label(Label::Bot)) {
    // Only misclassified bots can enter the intersection, so the margin is
    // computed for those alone.
    if (predictions[index_of(b)] != Label::Human) continue;
    const std::size_t deg = degree_stats(g, b).total();
    if (deg == 0 || deg > cp.degree_cap) continue;
    const MarginRecord rec = mine_nearest(geo, g, b, predictions, humans, bots, params, cache);
    if (rec.margin <= cp.tau_bdry) out.push_back({b, rec.margin, 0});
  }
  std::sort(out.begin(), out.end(), [](const CloakCandidate& x, const CloakCandidate& y) {
    if (x.margin != y.margin) return x.margin < y.margin;
    return x.node < y.node;
  });
  if (cp.top_n > 0 && out.size() > cp.top_n) out.resize(cp.top_n);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i;
  return out;
}

}  // namespace otcloak
