#include "otcloak/features.hpp"

#include <cmath>
#include <string>

#include "otcloak/errors.hpp"

namespace otcloak {

int edge_role(const DirectedSocialGraph& g, NodeId v, NodeId u) {
  const bool in = g.follows(u, v);
  const bool out = g.follows(v, u);
  if (in && out) return 0;
  if (in) return 1;
  if (out) return 2;
  throw NotNeighbor("node " + std::to_string(index_of(u)) + " is not adjacent to node " +
                    std::to_string(index_of(v)));
}

NeighborAtom neighbor_features(const DirectedSocialGraph& g, NodeId v, NodeId u) {
  const int role = edge_role(g, v, u);
  const auto& rec = g.node(u);
  const auto deg = degree_stats(g, u);
  const std::size_t dim = layout::feature_dim(g.content_dim());

  NeighborAtom atom{u, Vector(dim, 0.0)};
  auto& f = atom.feat;
  f[layout::kLabel] = rec.label == Label::Bot ? 1.0 : 0.0;
  f[layout::kDegIn] = static_cast<double>(deg.deg_in);
  f[layout::kDegOut] = static_cast<double>(deg.deg_out);
  f[layout::kRole] = static_cast<double>(role);
  for (std::size_t i = 0; i < rec.content.size(); ++i) f[layout::kContent + i] = rec.content[i];
  f[layout::age_index(dim)] = rec.age_norm;
  f[layout::age_diff_index(dim)] = rec.age_norm - g.node(v).age_norm;
  return atom;
}

double importance_score(const DirectedSocialGraph& g, NodeId v, NodeId u, const MeasureParams& p) {
  edge_role(g, v, u);  // adjacency check
  const double deg_raw = static_cast<double>(degree_stats(g, u).total());
  const double g_deg = 1.0 + p.alpha_deg * std::log1p(deg_raw);
  const double g_time = 1.0 + p.alpha_time * g.node(u).age_norm;
  return g_deg * g_time;
}

NeighborMeasure neighborhood_measure(const DirectedSocialGraph& g, NodeId v, const MeasureParams& p) {
  const auto neighbors = ego_neighborhood(g, v, 1);
  if (neighbors.empty()) {
    throw EmptyNeighborhood("node " + std::to_string(index_of(v)) + " has no neighbors");
  }
  NeighborMeasure mu;
  mu.atoms.reserve(neighbors.size());
  mu.weights.reserve(neighbors.size());
  double total = 0.0;
  for (NodeId u : neighbors) {
    mu.atoms.push_back(neighbor_features(g, v, u));
    const double a = importance_score(g, v, u, p);
    mu.weights.push_back(a);
    total += a;
  }
  for (double& w : mu.weights) w /= total;
  return mu;
}

}  // namespace otcloak
