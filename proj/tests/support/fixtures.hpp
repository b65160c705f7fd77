#pragma once

// Small hand-built graphs whose detector decisions can be worked out by hand.

#include <cstddef>
#include <vector>

#include "otcloak/attack.hpp"
#include "otcloak/cost_model.hpp"
#include "otcloak/detector.hpp"
#include "otcloak/features.hpp"
#include "otcloak/graph.hpp"
#include "otcloak/training.hpp"

namespace fixture {

inline constexpr std::size_t kContentDim = 2;

struct Fixture {
  otcloak::DirectedSocialGraph graph{kContentDim};
  std::vector<otcloak::NodeId> humans;
  std::vector<otcloak::NodeId> bots;
  std::vector<otcloak::NodeId> cloaks;
};

inline otcloak::NodeId add(otcloak::DirectedSocialGraph& g, otcloak::Label label, double age,
                           double content) {
  otcloak::NodeRecord rec;
  rec.label = label;
  rec.age_norm = age;
  rec.content = {content, -content};
  return g.add_node(std::move(rec));
}

/// Humans on a ring, each following the next two. Every ordinary bot follows
/// one human. Each planted cloak is a bot following two humans.
///
/// Under `decision_rule()` a node is predicted human exactly when it follows
/// at least two humans, so humans and cloaks read as human, ordinary bots
/// as bot, and any clone of a cloak or of a human's out-edges flips.
inline Fixture build(std::size_t n_humans = 8, std::size_t n_bots = 8, std::size_t n_cloaks = 2) {
  using otcloak::Label;
  Fixture f;
  auto& g = f.graph;
  for (std::size_t i = 0; i < n_humans; ++i)
    f.humans.push_back(add(g, Label::Human, 0.6 + 0.03 * static_cast<double>(i), 1.0));
  for (std::size_t i = 0; i < n_bots; ++i)
    f.bots.push_back(add(g, Label::Bot, 0.1 + 0.02 * static_cast<double>(i), -1.0));
  for (std::size_t i = 0; i < n_cloaks; ++i)
    f.cloaks.push_back(add(g, Label::Bot, 0.3, 0.5));

  for (std::size_t i = 0; i < n_humans; ++i) {
    g.add_edge(f.humans[i], f.humans[(i + 1) % n_humans]);
    g.add_edge(f.humans[i], f.humans[(i + 2) % n_humans]);
  }
  for (std::size_t i = 0; i < n_bots; ++i) g.add_edge(f.bots[i], f.humans[i % n_humans]);
  for (std::size_t i = 0; i < n_cloaks; ++i) {
    g.add_edge(f.cloaks[i], f.humans[(2 * i) % n_humans]);
    g.add_edge(f.cloaks[i], f.humans[(2 * i + 3) % n_humans]);
  }
  g.snapshot_baseline();
  return f;
}

/// Centroids differ only in out_h, so the rule is "out_h >= 2 means human".
inline otcloak::FixtureDetector decision_rule() {
  return otcloak::FixtureDetector({3.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0});
}

inline otcloak::OtGeometry small_geometry(std::uint64_t seed = 7) {
  return otcloak::init_geometry(otcloak::layout::feature_dim(kContentDim), 8, 4, seed);
}

}  // namespace fixture
