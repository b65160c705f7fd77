#include "otcloak/attack.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include <json.hpp>

#include "otcloak/errors.hpp"
#include "otcloak/log.hpp"

namespace otcloak {
namespace {

enum Stream : std::uint32_t { kEditStream = 1, kInjectStream = 2, kFallbackStream = 3, kRandomStream = 4 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double fresh_age(const AttackConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, cfg.fresh_age_max);
  return dist(rng);
}

// Editing keeps v_tar; injection creates a fresh, isolated bot with zero
// content and returns its id.
NodeId make_target(DirectedSocialGraph& g, CloneMode mode, NodeId v_tar) {
  if (mode == CloneMode::Editing) return v_tar;
  NodeRecord rec;
  rec.label = Label::Bot;
  rec.content.assign(g.content_dim(), 0.0);
  return g.add_node(std::move(rec));
}

NodeId begin_trial(DirectedSocialGraph& g, CloneMode mode, NodeId v_tar) {
  g.reset_to_baseline();
  return make_target(g, mode, v_tar);
}

// Runs one decoded clone: budget check, apply, query, record.
AttackTrace run_clone(const AttackContext& ctx, const AttackConfig& cfg, std::size_t trial,
                      NodeId target, Strategy strategy, std::optional<NodeId> cloak,
                      ClonePlan plan) {
  AttackTrace tr;
  tr.trial = trial;
  tr.target = target;
  tr.strategy = strategy;
  tr.cloak = cloak;
  tr.detector_before = Label::Bot;
  if (plan.edits.add_count() > cfg.budget_delta) {
    tr.outcome = Outcome::BudgetExceeded;
    tr.edits = std::move(plan.edits);
    return tr;
  }
  apply_clone(ctx.graph, plan);
  tr.edits = std::move(plan.edits);
  tr.detector_after = ctx.detector.predict(ctx.graph, target);
  tr.outcome = *tr.detector_after == Label::Human ? Outcome::Success : Outcome::Failure;
  return tr;
}

std::vector<AttackTrace> cloak_trials(const AttackContext& ctx, const CloakPool& pool,
                                      NodeId v_tar, const AttackConfig& cfg, CloneMode mode,
                                      std::mt19937_64& rng) {
  std::vector<NodeId> candidates;
  for (const auto& c : pool.candidates) candidates.push_back(c.node);
  UseCounts counts;
  const SampleOptions opts{cfg.reuse_cap, cfg.reset_on_saturation};
  std::vector<AttackTrace> traces;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    ctx.graph.reset_to_baseline();
    const NodeId t = sample_cloak(candidates, pool.weights, counts, opts, rng);
    const double age = fresh_age(cfg, rng);
    if (mode == CloneMode::Editing && t == v_tar) {
      AttackTrace tr;
      tr.trial = trial;
      tr.target = v_tar;
      tr.cloak = t;
      traces.push_back(std::move(tr));
      continue;
    }
    // Guidance is computed on the baseline graph, before an injected node
    // exists, so cached distances stay valid across trials.
    const Restriction r = ot_guided_neighbors(ctx.geometry, ctx.graph, t, ctx.pools.humans,
                                              cfg.effective_top_k(), cfg.distance, ctx.cache);
    const NodeId target = make_target(ctx.graph, mode, v_tar);
    ClonePlan plan = clone_cloak(ctx.graph, target, t, r, cfg.flag_hb, mode, age);
    traces.push_back(run_clone(ctx, cfg, trial, target, Strategy::Cloak, t, std::move(plan)));
    if (traces.back().outcome == Outcome::Success) ++counts[t];
  }
  ctx.graph.reset_to_baseline();
  return traces;
}

std::vector<AttackTrace> fallback_trials(const AttackContext& ctx, NodeId v_tar,
                                         const AttackConfig& cfg, CloneMode mode,
                                         std::mt19937_64& rng) {
  DirectedSocialGraph& g = ctx.graph;
  const NodeId probe = begin_trial(g, mode, v_tar);

  // Human order: OT distance from the target when it has a neighborhood,
  // otherwise ascending degree; ties by NodeId.
  std::vector<std::pair<double, NodeId>> order;
  const bool has_measure = degree_stats(g, probe).total() > 0;
  for (NodeId h : ctx.pools.humans) {
    if (h == probe) continue;
    const double key = has_measure ? ot_distance(ctx.geometry, g, probe, h, cfg.distance, ctx.cache)
                                   : static_cast<double>(degree_stats(g, h).total());
    order.emplace_back(key, h);
  }
  std::sort(order.begin(), order.end());

  const Restriction none;
  std::vector<NodeId> fitting;
  for (const auto& [key, h] : order) {
    const ClonePlan plan = clone_cloak(g, probe, h, none, cfg.flag_hb, mode, 0.0);
    if (plan.edits.add_count() <= cfg.budget_delta) fitting.push_back(h);
  }
  otcloak::log().debug("fallback for target {}: {} of {} humans fit the budget", index_of(probe),
                       fitting.size(), order.size());

  std::vector<AttackTrace> traces;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    const NodeId target = begin_trial(g, mode, v_tar);
    if (fitting.empty()) {
      AttackTrace tr;
      tr.trial = trial;
      tr.target = target;
      tr.strategy = Strategy::HumanFallback;
      traces.push_back(std::move(tr));
      continue;
    }
    const NodeId h = fitting[trial % fitting.size()];
    ClonePlan plan = clone_cloak(g, target, h, none, cfg.flag_hb, mode, fresh_age(cfg, rng));
    traces.push_back(
        run_clone(ctx, cfg, trial, target, Strategy::HumanFallback, h, std::move(plan)));
  }
  g.reset_to_baseline();
  return traces;
}

std::vector<AttackTrace> random_trials(const AttackContext& ctx, NodeId v_tar,
                                       const AttackConfig& cfg, CloneMode mode,
                                       std::mt19937_64& rng) {
  DirectedSocialGraph& g = ctx.graph;
  std::vector<AttackTrace> traces;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    const NodeId target = begin_trial(g, mode, v_tar);
    std::vector<EdgeEdit> feasible;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      const NodeId x = node_id(i);
      if (x == target) continue;
      if (!g.has_edge(target, x)) feasible.push_back({EditOp::Add, target, x, kFollow});
      if (g.label(x) == Label::Bot || !cfg.flag_hb) {
        if (!g.has_edge(x, target)) feasible.push_back({EditOp::Add, x, target, kFollow});
      }
    }
    const std::size_t k = std::min(cfg.budget_delta, feasible.size());
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, feasible.size() - 1);
      std::swap(feasible[i], feasible[pick(rng)]);
    }
    ClonePlan plan;
    plan.edits.target = target;
    plan.edits.edits.assign(feasible.begin(), feasible.begin() + static_cast<std::ptrdiff_t>(k));
    plan.content = g.node(target).content;
    plan.age_norm = g.node(target).age_norm;
    traces.push_back(
        run_clone(ctx, cfg, trial, target, Strategy::Random, std::nullopt, std::move(plan)));
  }
  g.reset_to_baseline();
  return traces;
}

void require_baseline(const AttackContext& ctx) {
  if (!ctx.graph.has_baseline()) throw InvalidParams("attack graph has no baseline snapshot");
}

}  // namespace

void AttackConfig::validate() const {
  if (budget_delta < 1) throw InvalidParams("budget must be at least 1");
  if (reuse_cap < 1) throw InvalidParams("reuse cap must be at least 1");
  if (!(fresh_age_max >= 0.0 && fresh_age_max <= 1.0)) {
    throw InvalidParams("fresh_age_max must lie in [0, 1]");
  }
}

const char* to_string(Outcome outcome) noexcept {
  switch (outcome) {
    case Outcome::Success: return "success";
    case Outcome::Failure: return "failure";
    case Outcome::BudgetExceeded: return "budget_exceeded";
  }
  return "failure";
}

const char* to_string(Strategy strategy) noexcept {
  switch (strategy) {
    case Strategy::Cloak: return "cloak";
    case Strategy::HumanFallback: return "human_fallback";
    case Strategy::Random: return "random";
  }
  return "cloak";
}

std::vector<NodeId> top_rows_by_mass(const DirectedSocialGraph& g, NodeId t,
                                     const NeighborMeasure& mu_t, const Matrix& plan,
                                     std::size_t top_k) {
  if (plan.rows() != mu_t.size()) throw ShapeError("plan rows do not match the cloak measure");
  const Vector rho = row_masses(plan);
  std::vector<std::pair<double, NodeId>> rows;
  for (std::size_t i = 0; i < mu_t.size(); ++i) {
    const NodeId u = mu_t.atoms[i].neighbor;
    if (g.follows(t, u)) rows.emplace_back(rho[i], u);
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  if (rows.size() > top_k) rows.resize(top_k);
  std::vector<NodeId> out;
  for (const auto& r : rows) out.push_back(r.second);
  std::sort(out.begin(), out.end());
  return out;
}

Restriction ot_guided_neighbors(const OtGeometry& geo, const DirectedSocialGraph& g, NodeId t,
                                std::span<const NodeId> humans, std::size_t top_k,
                                const DistanceParams& params, DistanceCache* cache) {
  Restriction r;
  if (!(params.sinkhorn.epsilon > 0.0) || top_k == 0) return r;
  g.require(t);
  if (degree_stats(g, t).total() == 0) {
    throw EmptyNeighborhood("cloak " + std::to_string(index_of(t)) + " has no neighbors");
  }
  bool found = false;
  NodeId best{};
  double best_d = 0.0;
  for (NodeId h : humans) {
    if (h == t || degree_stats(g, h).total() == 0) continue;
    const double d = ot_distance(geo, g, t, h, params, cache);
    if (!found || d < best_d || (d == best_d && h < best)) {
      found = true;
      best = h;
      best_d = d;
    }
  }
  if (!found) throw EmptyPool("no human with a neighborhood to guide the cloak");
  const PairSolve solve = solve_pair(geo, g, t, best, params, cache);
  r.active = true;
  r.allowed = top_rows_by_mass(g, t, solve.source->measure, solve.plan.plan, top_k);
  return r;
}

ClonePlan clone_cloak(const DirectedSocialGraph& g, NodeId v_tar, NodeId t,
                      const Restriction& restriction, bool flag_hb, CloneMode mode,
                      double fresh_age_value) {
  g.require(v_tar);
  g.require(t);
  if (v_tar == t) throw ConstraintViolation("cloak and target are the same node");
  ClonePlan plan;
  plan.edits.target = v_tar;
  plan.content = g.node(t).content;
  plan.age_norm = fresh_age_value;

  if (mode == CloneMode::Editing) {
    for (const auto& n : g.out_neighbors(v_tar)) {
      plan.edits.edits.push_back({EditOp::Delete, v_tar, n.node, n.relation});
    }
    for (const auto& n : g.in_neighbors(v_tar)) {
      plan.edits.edits.push_back({EditOp::Delete, n.node, v_tar, n.relation});
    }
  }

  // An empty intersection with the restriction falls back to all out-neighbors.
  std::vector<NodeId> out;
  for (const auto& n : g.out_neighbors(t)) {
    if (n.relation != kFollow || n.node == v_tar) continue;
    out.push_back(n.node);
  }
  if (restriction.active) {
    std::vector<NodeId> kept;
    std::set_intersection(out.begin(), out.end(), restriction.allowed.begin(),
                          restriction.allowed.end(), std::back_inserter(kept));
    if (!kept.empty()) out = std::move(kept);
  }
  for (NodeId x : out) plan.edits.edits.push_back({EditOp::Add, v_tar, x, kFollow});

  for (const auto& n : g.in_neighbors(t)) {
    if (n.relation != kFollow || n.node == v_tar) continue;
    if (flag_hb && g.label(n.node) == Label::Human) continue;
    plan.edits.edits.push_back({EditOp::Add, n.node, v_tar, kFollow});
  }

  for (const auto& e : plan.edits.edits) {
    if (e.src != v_tar && e.dst != v_tar) {
      throw ConstraintViolation("clone produced an edit not incident to the target");
    }
  }
  return plan;
}

void apply_clone(DirectedSocialGraph& g, const ClonePlan& plan) {
  g.set_node_attributes(plan.edits.target, plan.content, plan.age_norm);
  apply_edits(g, plan.edits);
}

CloakPool prepare_cloaks(const AttackContext& ctx, const AttackConfig& cfg) {
  require_baseline(ctx);
  ctx.graph.reset_to_baseline();
  CloakPool pool;
  CandidateParams cp;
  cp.tau_bdry = cfg.tau_bdry;
  cp.degree_cap = cfg.effective_degree_cap();
  cp.top_n = cfg.top_boundary;
  pool.candidates = boundary_candidates(ctx.geometry, ctx.graph, ctx.predictions, ctx.pools.humans,
                                        ctx.pools.bots, cp, cfg.distance, ctx.cache);
  pool.profiles = make_profiles(ctx.graph, pool.candidates);
  pool.weights = importance_weights(pool.profiles);
  return pool;
}

std::vector<AttackTrace> bocloak_edit(const AttackContext& ctx, const CloakPool& pool, NodeId v_tar,
                                      const AttackConfig& cfg) {
  cfg.validate();
  require_baseline(ctx);
  ctx.graph.require(v_tar);
  if (pool.candidates.empty()) return human_fallback(ctx, v_tar, cfg, CloneMode::Editing);
  auto rng = make_rng(cfg.seed, kEditStream, index_of(v_tar));
  return cloak_trials(ctx, pool, v_tar, cfg, CloneMode::Editing, rng);
}

std::vector<AttackTrace> bocloak_inject(const AttackContext& ctx, const CloakPool& pool,
                                        const AttackConfig& cfg, std::size_t injection_index) {
  cfg.validate();
  require_baseline(ctx);
  if (pool.candidates.empty()) {
    auto rng = make_rng(cfg.seed, kFallbackStream, injection_index);
    return fallback_trials(ctx, NodeId{}, cfg, CloneMode::Injection, rng);
  }
  auto rng = make_rng(cfg.seed, kInjectStream, injection_index);
  return cloak_trials(ctx, pool, NodeId{}, cfg, CloneMode::Injection, rng);
}

std::vector<AttackTrace> human_fallback(const AttackContext& ctx, NodeId v_tar,
                                        const AttackConfig& cfg, CloneMode mode) {
  cfg.validate();
  require_baseline(ctx);
  auto rng = make_rng(cfg.seed, kFallbackStream, index_of(v_tar));
  return fallback_trials(ctx, v_tar, cfg, mode, rng);
}

std::vector<AttackTrace> random_edit(const AttackContext& ctx, NodeId v_tar,
                                     const AttackConfig& cfg) {
  cfg.validate();
  require_baseline(ctx);
  ctx.graph.require(v_tar);
  auto rng = make_rng(cfg.seed, kRandomStream, index_of(v_tar));
  return random_trials(ctx, v_tar, cfg, CloneMode::Editing, rng);
}

std::vector<AttackTrace> random_inject(const AttackContext& ctx, const AttackConfig& cfg,
                                       std::size_t injection_index) {
  cfg.validate();
  require_baseline(ctx);
  auto rng = make_rng(cfg.seed, kRandomStream, (std::uint64_t{1} << 40) + injection_index);
  return random_trials(ctx, NodeId{}, cfg, CloneMode::Injection, rng);
}

bool any_success(std::span<const AttackTrace> traces) {
  return std::any_of(traces.begin(), traces.end(),
                     [](const AttackTrace& t) { return t.outcome == Outcome::Success; });
}

void write_traces(std::ostream& out, std::span<const AttackTrace> traces) {
  for (const auto& t : traces) {
    nlohmann::ordered_json edits = nlohmann::ordered_json::array();
    for (const auto& e : t.edits.edits) {
      edits.push_back({{"op", e.op == EditOp::Add ? "add" : "delete"},
                       {"src", index_of(e.src)},
                       {"dst", index_of(e.dst)}});
    }
    nlohmann::ordered_json j;
    j["trial"] = t.trial;
    j["target"] = index_of(t.target);
    j["strategy"] = to_string(t.strategy);
    j["cloak"] = t.cloak ? nlohmann::ordered_json(index_of(*t.cloak)) : nlohmann::ordered_json();
    j["edits"] = std::move(edits);
    j["outcome"] = to_string(t.outcome);
    j["detector_before"] = to_string(t.detector_before);
    j["detector_after"] =
        t.detector_after ? nlohmann::ordered_json(to_string(*t.detector_after)) : nlohmann::ordered_json();
    out << j.dump() << '\n';
  }
}

}  // namespace otcloak
