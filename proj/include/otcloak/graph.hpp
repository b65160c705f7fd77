#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "otcloak/matrix.hpp"

namespace otcloak {

/// Opaque node handle. Handles are dense indices assigned in insertion order.
enum class NodeId : std::uint32_t {};

constexpr std::size_t index_of(NodeId id) noexcept { return static_cast<std::size_t>(id); }
constexpr NodeId node_id(std::size_t index) noexcept {
  return static_cast<NodeId>(static_cast<std::uint32_t>(index));
}

enum class Label : std::uint8_t { Human = 0, Bot = 1 };

const char* to_string(Label label) noexcept;

/// Relation tag carried by every edge; 0 is "follow".
using Relation = std::uint8_t;
inline constexpr Relation kFollow = 0;

struct NodeRecord {
  Label label = Label::Human;
  std::optional<Label> predicted;
  double age_norm = 0.0;  // in [0, 1]
  Vector content;

  friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

struct Neighbor {
  NodeId node;
  Relation relation = kFollow;

  friend auto operator<=>(const Neighbor&, const Neighbor&) = default;
};

enum class EditOp : std::uint8_t { Add, Delete };

struct EdgeEdit {
  EditOp op = EditOp::Add;
  NodeId src{};
  NodeId dst{};
  Relation relation = kFollow;

  friend bool operator==(const EdgeEdit&, const EdgeEdit&) = default;
};

/// A batch of edge edits that must all touch `target`.
struct EditSet {
  NodeId target{};
  std::vector<EdgeEdit> edits;

  std::size_t add_count() const noexcept;
  std::size_t delete_count() const noexcept;
};

struct ApplyResult {
  std::size_t applied = 0;
  std::size_t noops = 0;
};

struct DegreeStats {
  std::size_t deg_in = 0;
  std::size_t deg_out = 0;

  std::size_t total() const noexcept { return deg_in + deg_out; }
  friend bool operator==(const DegreeStats&, const DegreeStats&) = default;
};

/// Directed, labeled follow graph with an immutable baseline snapshot.
///
/// Adjacency lists are kept sorted by (node, relation) so every traversal is
/// deterministic. Every mutation assigns a fresh, process-unique `revision()`
/// and a reset restores the baseline's revision, so caches can key on it.
/// Reads may be shared across threads; mutations need exclusive
/// access.
class DirectedSocialGraph {
 public:
  explicit DirectedSocialGraph(std::size_t content_dim = 0);

  std::size_t content_dim() const noexcept { return content_dim_; }
  std::size_t node_count() const noexcept { return state_.nodes.size(); }
  std::size_t edge_count() const noexcept { return state_.edge_count; }
  std::uint64_t revision() const noexcept { return revision_; }

  bool contains(NodeId v) const noexcept { return index_of(v) < state_.nodes.size(); }
  /// Throws NodeNotFound for unknown handles.
  void require(NodeId v) const;

  NodeId add_node(NodeRecord record);
  const NodeRecord& node(NodeId v) const;
  Label label(NodeId v) const { return node(v).label; }

  /// Replaces the mutable attributes of one node (content and age).
  void set_node_attributes(NodeId v, Vector content, double age_norm);

  /// Returns false when the edge already exists.
  bool add_edge(NodeId src, NodeId dst, Relation relation = kFollow);
  /// Returns false when the edge is absent.
  bool remove_edge(NodeId src, NodeId dst, Relation relation = kFollow);
  bool has_edge(NodeId src, NodeId dst, Relation relation = kFollow) const;
  /// True when src -> dst exists under any relation tag.
  bool follows(NodeId src, NodeId dst) const;

  std::span<const Neighbor> out_neighbors(NodeId v) const;
  std::span<const Neighbor> in_neighbors(NodeId v) const;

  std::vector<NodeId> nodes_with_label(Label label) const;

  /// Captures the current state as the baseline.
  void snapshot_baseline();
  bool has_baseline() const noexcept { return baseline_ != nullptr; }
  /// Restores the baseline captured by `snapshot_baseline`.
  void reset_to_baseline();
  /// True when nodes and adjacency equal the baseline exactly.
  bool matches_baseline() const;

 private:
  struct State {
    std::vector<NodeRecord> nodes;
    std::vector<std::vector<Neighbor>> out_adj;
    std::vector<std::vector<Neighbor>> in_adj;
    std::size_t edge_count = 0;

    friend bool operator==(const State&, const State&) = default;
  };

  std::size_t content_dim_;
  State state_;
  std::shared_ptr<const State> baseline_;
  std::uint64_t revision_ = 0;
  std::uint64_t baseline_revision_ = 0;
};

DegreeStats degree_stats(const DirectedSocialGraph& g, NodeId v);

/// Undirected k-hop neighborhood of v over all relations, v excluded,
/// ascending NodeId.
std::vector<NodeId> ego_neighborhood(const DirectedSocialGraph& g, NodeId v, std::size_t k = 1);

/// Applies an edit batch. Adds of existing edges and deletes of absent edges
/// are counted as no-ops. Throws ConstraintViolation (before touching the
/// graph) if any edit is not incident to `edits.target` or is a self-loop.
ApplyResult apply_edits(DirectedSocialGraph& g, const EditSet& edits);

/// Returns the edit set that undoes `edits` when applied to the post-edit graph.
/// Only meaningful when every edit in `edits` was applied (no no-ops).
EditSet inverse(const EditSet& edits);

void reset_to_baseline(DirectedSocialGraph& g);

}  // namespace otcloak
