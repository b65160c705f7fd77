#include "otcloak/graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "otcloak/errors.hpp"

namespace otcloak {

const char* to_string(Label label) noexcept { return label == Label::Bot ? "bot" : "human"; }

std::size_t EditSet::add_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(edits.begin(), edits.end(), [](const EdgeEdit& e) { return e.op == EditOp::Add; }));
}

std::size_t EditSet::delete_count() const noexcept { return edits.size() - add_count(); }

namespace {

std::string describe(NodeId v) { return "node " + std::to_string(index_of(v)); }

bool insert_sorted(std::vector<Neighbor>& list, Neighbor n) {
  auto it = std::lower_bound(list.begin(), list.end(), n);
  if (it != list.end() && *it == n) return false;
  list.insert(it, n);
  return true;
}

// Revisions are drawn from one process-wide counter so that a value never
// names two different states, even across graph copies.
std::uint64_t next_revision() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed) + 1;
}

bool erase_sorted(std::vector<Neighbor>& list, Neighbor n) {
  auto it = std::lower_bound(list.begin(), list.end(), n);
  if (it == list.end() || *it != n) return false;
  list.erase(it);
  return true;
}

}  // namespace

DirectedSocialGraph::DirectedSocialGraph(std::size_t content_dim) : content_dim_(content_dim) {}

void DirectedSocialGraph::require(NodeId v) const {
  if (!contains(v)) throw NodeNotFound(describe(v) + " does not exist");
}

NodeId DirectedSocialGraph::add_node(NodeRecord record) {
  if (record.content.size() != content_dim_) {
    throw ShapeError("content dimension " + std::to_string(record.content.size()) +
                     " != graph content dimension " + std::to_string(content_dim_));
  }
  if (!(record.age_norm >= 0.0 && record.age_norm <= 1.0)) {
    throw InvalidParams("age_norm must lie in [0,1]");
  }
  const NodeId id = node_id(state_.nodes.size());
  state_.nodes.push_back(std::move(record));
  state_.out_adj.emplace_back();
  state_.in_adj.emplace_back();
  revision_ = next_revision();
  return id;
}

const NodeRecord& DirectedSocialGraph::node(NodeId v) const {
  require(v);
  return state_.nodes[index_of(v)];
}

void DirectedSocialGraph::set_node_attributes(NodeId v, Vector content, double age_norm) {
  require(v);
  if (content.size() != content_dim_) throw ShapeError("content dimension mismatch");
  if (!(age_norm >= 0.0 && age_norm <= 1.0)) throw InvalidParams("age_norm must lie in [0,1]");
  auto& rec = state_.nodes[index_of(v)];
  rec.content = std::move(content);
  rec.age_norm = age_norm;
  revision_ = next_revision();
}

bool DirectedSocialGraph::add_edge(NodeId src, NodeId dst, Relation relation) {
  require(src);
  require(dst);
  if (src == dst) throw ConstraintViolation("self-loop on " + describe(src));
  if (!insert_sorted(state_.out_adj[index_of(src)], {dst, relation})) return false;
  insert_sorted(state_.in_adj[index_of(dst)], {src, relation});
  ++state_.edge_count;
  revision_ = next_revision();
  return true;
}

bool DirectedSocialGraph::remove_edge(NodeId src, NodeId dst, Relation relation) {
  require(src);
  require(dst);
  if (!erase_sorted(state_.out_adj[index_of(src)], {dst, relation})) return false;
  erase_sorted(state_.in_adj[index_of(dst)], {src, relation});
  --state_.edge_count;
  revision_ = next_revision();
  return true;
}

bool DirectedSocialGraph::has_edge(NodeId src, NodeId dst, Relation relation) const {
  const auto out = out_neighbors(src);
  require(dst);
  return std::binary_search(out.begin(), out.end(), Neighbor{dst, relation});
}

bool DirectedSocialGraph::follows(NodeId src, NodeId dst) const {
  const auto out = out_neighbors(src);
  require(dst);
  auto it = std::lower_bound(out.begin(), out.end(), Neighbor{dst, 0});
  return it != out.end() && it->node == dst;
}

std::span<const Neighbor> DirectedSocialGraph::out_neighbors(NodeId v) const {
  require(v);
  return state_.out_adj[index_of(v)];
}

std::span<const Neighbor> DirectedSocialGraph::in_neighbors(NodeId v) const {
  require(v);
  return state_.in_adj[index_of(v)];
}

std::vector<NodeId> DirectedSocialGraph::nodes_with_label(Label label) const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < state_.nodes.size(); ++i) {
    if (state_.nodes[i].label == label) out.push_back(node_id(i));
  }
  return out;
}

void DirectedSocialGraph::snapshot_baseline() {
  baseline_ = std::make_shared<const State>(state_);
  baseline_revision_ = revision_;
}

void DirectedSocialGraph::reset_to_baseline() {
  if (!baseline_) throw InvalidParams("no baseline snapshot has been captured");
  state_ = *baseline_;
  revision_ = baseline_revision_;
}

bool DirectedSocialGraph::matches_baseline() const { return baseline_ && state_ == *baseline_; }

DegreeStats degree_stats(const DirectedSocialGraph& g, NodeId v) {
  return {g.in_neighbors(v).size(), g.out_neighbors(v).size()};
}

std::vector<NodeId> ego_neighborhood(const DirectedSocialGraph& g, NodeId v, std::size_t k) {
  g.require(v);
  if (k == 0) throw InvalidParams("ego neighborhood needs k >= 1");
  std::vector<char> seen(g.node_count(), 0);
  seen[index_of(v)] = 1;
  std::vector<NodeId> frontier{v};
  std::vector<NodeId> result;
  for (std::size_t hop = 0; hop < k && !frontier.empty(); ++hop) {
    std::vector<NodeId> next;
    for (NodeId u : frontier) {
      auto visit = [&](std::span<const Neighbor> list) {
        for (const auto& n : list) {
          if (!seen[index_of(n.node)]) {
            seen[index_of(n.node)] = 1;
            next.push_back(n.node);
          }
        }
      };
      visit(g.out_neighbors(u));
      visit(g.in_neighbors(u));
    }
    result.insert(result.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  std::sort(result.begin(), result.end());
  return result;
}

ApplyResult apply_edits(DirectedSocialGraph& g, const EditSet& edits) {
  g.require(edits.target);
  for (const auto& e : edits.edits) {
    if (e.src != edits.target && e.dst != edits.target) {
      throw ConstraintViolation("edit " + std::to_string(index_of(e.src)) + "->" +
                                std::to_string(index_of(e.dst)) + " is not incident to target " +
                                std::to_string(index_of(edits.target)));
    }
    if (e.src == e.dst) throw ConstraintViolation("self-loop edit on " + describe(e.src));
    g.require(e.src);
    g.require(e.dst);
  }
  ApplyResult result;
  for (const auto& e : edits.edits) {
    const bool changed = e.op == EditOp::Add ? g.add_edge(e.src, e.dst, e.relation)
                                             : g.remove_edge(e.src, e.dst, e.relation);
    ++(changed ? result.applied : result.noops);
  }
  return result;
}

EditSet inverse(const EditSet& edits) {
  EditSet inv{edits.target, {}};
  inv.edits.reserve(edits.edits.size());
  for (auto it = edits.edits.rbegin(); it != edits.edits.rend(); ++it) {
    EdgeEdit e = *it;
    e.op = e.op == EditOp::Add ? EditOp::Delete : EditOp::Add;
    inv.edits.push_back(e);
  }
  return inv;
}

void reset_to_baseline(DirectedSocialGraph& g) { g.reset_to_baseline(); }

}  // namespace otcloak
