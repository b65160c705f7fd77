#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "otcloak/graph.hpp"

namespace otcloak {

/// Beta(a, b) age distribution parameters.
struct AgeProfile {
  double alpha = 2.0;
  double beta = 2.0;
};

struct GenParams {
  std::size_t n_humans = 195;
  std::size_t n_bots = 335;
  double human_mean_degree = 5.18;  // mean total (in + out) degree
  double bot_mean_degree = 0.22;
  /// Probability that an edge stub pairs within its own class.
  double homophily = 0.6;
  /// Probability that a cross-class edge points bot -> human.
  double bot_to_human_bias = 0.8;
  std::size_t content_dim = 8;
  /// Distance between the class means of every content coordinate.
  double content_separation = 3.0;
  AgeProfile human_age{3.0, 2.0};
  AgeProfile bot_age{2.0, 3.0};
  /// Fraction of bots given human-like content and age, 1-3 follows of
  /// humans and 1-2 camouflaged followers. They seed the misclassified pool.
  double camouflage_fraction = 0.04;
  std::uint64_t seed = 0;

  /// Throws InvalidParams on infeasible settings.
  void validate() const;
};

/// Named presets: "cresci-like", "twibot-like", "botsim-like".
GenParams preset(std::string_view name);
std::vector<std::string> preset_names();

struct GeneratedGraph {
  DirectedSocialGraph graph;
  std::vector<NodeId> camouflaged;  // ascending
};

/// Humans first, then bots. Deterministic under the seed. The returned graph
/// carries a baseline snapshot.
GeneratedGraph generate(const GenParams& params);

}  // namespace otcloak
