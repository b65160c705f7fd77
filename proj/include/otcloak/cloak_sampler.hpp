#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "otcloak/geometry.hpp"
#include "otcloak/graph.hpp"

namespace otcloak {

/// Which labeled classes a node's edges reach along one direction.
enum class Reach : std::uint8_t { Humans = 0, Bots = 1, Both = 2, Nobody = 3 };

const char* to_string(Reach reach) noexcept;

/// One of the 4 x 4 (outgoing, incoming) structural categories.
struct StructuralCategory {
  Reach outgoing = Reach::Nobody;
  Reach incoming = Reach::Nobody;

  /// Dense index in [0, 16).
  int index() const noexcept { return static_cast<int>(outgoing) * 4 + static_cast<int>(incoming); }
  static StructuralCategory from_index(int index);
  /// e.g. "follow_humans_followed_by_bots".
  std::string name() const;

  friend auto operator<=>(const StructuralCategory&, const StructuralCategory&) = default;
};

inline constexpr int kCategoryCount = 16;

StructuralCategory structural_category(const DirectedSocialGraph& g, NodeId t);

struct CloakProfile {
  NodeId node{};
  StructuralCategory category;
  std::size_t in_h = 0;
  std::size_t in_b = 0;
  std::size_t out_h = 0;
  std::size_t out_b = 0;
  std::size_t e = 0;   // out_h + out_b + in_h + in_b
  bool eta = false;    // in_h > 0
  std::size_t rank = 0;
};

CloakProfile make_profile(const DirectedSocialGraph& g, NodeId t, std::size_t rank);
std::vector<CloakProfile> make_profiles(const DirectedSocialGraph& g,
                                        std::span<const CloakCandidate> candidates);

struct SamplingWeights {
  /// Category index -> probability, over categories with at least one cloak.
  std::map<int, double> p_category;
  /// Category index -> (cloak, probability) in profile order.
  std::map<int, std::vector<std::pair<NodeId, double>>> p_cloak;
};

SamplingWeights importance_weights(std::span<const CloakProfile> profiles);

/// Successful-use counts per cloak.
using UseCounts = std::map<NodeId, std::size_t>;

struct SampleOptions {
  std::size_t reuse_cap = 3;
  /// When every candidate sits at the cap, zero their counts instead of
  /// sampling from the unrestricted distributions.
  bool reset_on_saturation = false;
};

/// Draws a cloak, restricted to candidates used fewer than `reuse_cap` times
/// whenever any exist. `counts` is only written by a saturation reset.
NodeId sample_cloak(std::span<const NodeId> candidates, const SamplingWeights& weights,
                    UseCounts& counts, const SampleOptions& opts, std::mt19937_64& rng);

}  // namespace otcloak
