#pragma once

#include <cstddef>
#include <vector>

#include "otcloak/graph.hpp"

namespace otcloak {

// Per-neighbor feature layout:
//   [label(u), deg_in(u), deg_out(u), role_v(u), content(u)..., age(u), age(u) - age(v)]
namespace layout {
inline constexpr std::size_t kLabel = 0;
inline constexpr std::size_t kDegIn = 1;
inline constexpr std::size_t kDegOut = 2;
inline constexpr std::size_t kRole = 3;
inline constexpr std::size_t kContent = 4;

constexpr std::size_t feature_dim(std::size_t content_dim) noexcept { return 4 + content_dim + 2; }
constexpr std::size_t age_index(std::size_t dim) noexcept { return dim - 2; }
constexpr std::size_t age_diff_index(std::size_t dim) noexcept { return dim - 1; }
}  // namespace layout

struct NeighborAtom {
  NodeId neighbor{};
  Vector feat;

  friend bool operator==(const NeighborAtom&, const NeighborAtom&) = default;
};

/// Importance-weighted empirical distribution over a node's neighbor atoms.
/// Weights are strictly positive and sum to one; atoms are ordered by
/// ascending neighbor id.
struct NeighborMeasure {
  std::vector<NeighborAtom> atoms;
  Vector weights;

  std::size_t size() const noexcept { return atoms.size(); }
};

struct MeasureParams {
  double alpha_deg = 0.8;
  double alpha_time = 0.2;
};

/// 1 if u follows v only, 2 if v follows u only, 0 if mutual.
/// Throws NotNeighbor when no edge joins them.
int edge_role(const DirectedSocialGraph& g, NodeId v, NodeId u);

NeighborAtom neighbor_features(const DirectedSocialGraph& g, NodeId v, NodeId u);

/// a_v(u) = (1 + alpha_deg log(1 + deg(u))) (1 + alpha_time age(u)), with
/// deg the total (in + out) degree of u.
double importance_score(const DirectedSocialGraph& g, NodeId v, NodeId u, const MeasureParams& p);

/// Throws EmptyNeighborhood for isolated nodes.
NeighborMeasure neighborhood_measure(const DirectedSocialGraph& g, NodeId v,
                                     const MeasureParams& p = {});

}  // namespace otcloak
