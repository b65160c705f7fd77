#include "otcloak/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "otcloak/dataset_io.hpp"
#include "otcloak/errors.hpp"
#include "otcloak/log.hpp"

namespace otcloak {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Reads the keys of one JSON object into fields, rejecting unknown keys.
class Fields {
 public:
  Fields(const json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
    if (!j.is_object()) throw InvalidParams(scope_ + " must be a JSON object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw InvalidParams(scope_ + "." + key + ": " + e.what());
    }
  }

  template <class T>
  void read_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T value{};
    read(key, value);
    out = value;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw InvalidParams("unknown configuration key " + scope_ + "." + key);
    }
  }

 private:
  const json& j_;
  std::string scope_;
  std::set<std::string> seen_;
};

ojson distance_json(const DistanceParams& p) {
  return ojson{{"epsilon", p.sinkhorn.epsilon},
               {"max_iterations", p.sinkhorn.max_iterations},
               {"marginal_tolerance", p.sinkhorn.marginal_tolerance},
               {"alpha_deg", p.measure.alpha_deg},
               {"alpha_time", p.measure.alpha_time}};
}

void read_distance(const json& j, const std::string& scope, DistanceParams& p) {
  Fields f(j, scope);
  f.read("epsilon", p.sinkhorn.epsilon);
  f.read("max_iterations", p.sinkhorn.max_iterations);
  f.read("marginal_tolerance", p.sinkhorn.marginal_tolerance);
  f.read("alpha_deg", p.measure.alpha_deg);
  f.read("alpha_time", p.measure.alpha_time);
  f.finish();
}

ojson gen_json(const GenParams& p) {
  return ojson{{"n_humans", p.n_humans},
               {"n_bots", p.n_bots},
               {"human_mean_degree", p.human_mean_degree},
               {"bot_mean_degree", p.bot_mean_degree},
               {"homophily", p.homophily},
               {"bot_to_human_bias", p.bot_to_human_bias},
               {"content_dim", p.content_dim},
               {"content_separation", p.content_separation},
               {"human_age", {p.human_age.alpha, p.human_age.beta}},
               {"bot_age", {p.bot_age.alpha, p.bot_age.beta}},
               {"camouflage_fraction", p.camouflage_fraction},
               {"seed", p.seed}};
}

void read_age(Fields& f, const char* key, AgeProfile& p) {
  std::vector<double> ab{p.alpha, p.beta};
  f.read(key, ab);
  if (ab.size() != 2) throw InvalidParams(std::string(key) + " must be [alpha, beta]");
  p = {ab[0], ab[1]};
}

void read_gen(const json& j, GenParams& p) {
  Fields f(j, "gen");
  f.read("n_humans", p.n_humans);
  f.read("n_bots", p.n_bots);
  f.read("human_mean_degree", p.human_mean_degree);
  f.read("bot_mean_degree", p.bot_mean_degree);
  f.read("homophily", p.homophily);
  f.read("bot_to_human_bias", p.bot_to_human_bias);
  f.read("content_dim", p.content_dim);
  f.read("content_separation", p.content_separation);
  read_age(f, "human_age", p.human_age);
  read_age(f, "bot_age", p.bot_age);
  f.read("camouflage_fraction", p.camouflage_fraction);
  f.read("seed", p.seed);
  f.finish();
}

ojson detector_json(const DetectorConfig& c) {
  return ojson{{"hidden_dim", c.hidden_dim},       {"num_relations", c.num_relations},
               {"epochs", c.epochs},               {"learning_rate", c.learning_rate},
               {"split_fraction", c.split_fraction}, {"weight_decay", c.weight_decay},
               {"seed", c.seed}};
}

void read_detector(const json& j, DetectorConfig& c) {
  Fields f(j, "detector");
  f.read("hidden_dim", c.hidden_dim);
  f.read("num_relations", c.num_relations);
  f.read("epochs", c.epochs);
  f.read("learning_rate", c.learning_rate);
  f.read("split_fraction", c.split_fraction);
  f.read("weight_decay", c.weight_decay);
  f.read("seed", c.seed);
  f.finish();
}

ojson train_json(const TrainConfig& c) {
  return ojson{{"lambda_bce", c.lambda_bce},
               {"lambda_sp", c.lambda_sp},
               {"lambda_pl", c.lambda_pl},
               {"tau_bce", c.tau_bce},
               {"tau_bdry", c.tau_bdry},
               {"alpha_deg_pl", c.alpha_deg_pl},
               {"alpha_age_pl", c.alpha_age_pl},
               {"gamma", c.gamma},
               {"batch_size", c.batch_size},
               {"epochs", c.epochs},
               {"learning_rate", c.learning_rate},
               {"human_pool_size", c.human_pool_size},
               {"bot_pool_size", c.bot_pool_size},
               {"hidden_dim", c.hidden_dim},
               {"embed_dim", c.embed_dim},
               {"seed", c.seed},
               {"distance", distance_json(c.distance)},
               {"evaluate_endpoints", c.evaluate_endpoints}};
}

void read_train(const json& j, TrainConfig& c) {
  Fields f(j, "geometry");
  f.read("lambda_bce", c.lambda_bce);
  f.read("lambda_sp", c.lambda_sp);
  f.read("lambda_pl", c.lambda_pl);
  f.read("tau_bce", c.tau_bce);
  f.read("tau_bdry", c.tau_bdry);
  f.read("alpha_deg_pl", c.alpha_deg_pl);
  f.read("alpha_age_pl", c.alpha_age_pl);
  f.read("gamma", c.gamma);
  f.read("batch_size", c.batch_size);
  f.read("epochs", c.epochs);
  f.read("learning_rate", c.learning_rate);
  f.read("human_pool_size", c.human_pool_size);
  f.read("bot_pool_size", c.bot_pool_size);
  f.read("hidden_dim", c.hidden_dim);
  f.read("embed_dim", c.embed_dim);
  f.read("seed", c.seed);
  if (const json* d = f.child("distance")) read_distance(*d, "geometry.distance", c.distance);
  f.read("evaluate_endpoints", c.evaluate_endpoints);
  f.finish();
}

ojson attack_json(const AttackConfig& c) {
  return ojson{{"budget_delta", c.budget_delta},
               {"top_k", c.effective_top_k()},
               {"reuse_cap", c.reuse_cap},
               {"flag_hb", c.flag_hb},
               {"trials", c.trials},
               {"tau_bdry", c.tau_bdry},
               {"degree_cap", c.effective_degree_cap()},
               {"top_boundary", c.top_boundary},
               {"reset_on_saturation", c.reset_on_saturation},
               {"fresh_age_max", c.fresh_age_max},
               {"seed", c.seed},
               {"distance", distance_json(c.distance)}};
}

void read_attack(const json& j, AttackConfig& c) {
  Fields f(j, "attack");
  f.read("budget_delta", c.budget_delta);
  f.read_optional("top_k", c.top_k);
  f.read("reuse_cap", c.reuse_cap);
  f.read("flag_hb", c.flag_hb);
  f.read("trials", c.trials);
  f.read("tau_bdry", c.tau_bdry);
  f.read_optional("degree_cap", c.degree_cap);
  f.read("top_boundary", c.top_boundary);
  f.read("reset_on_saturation", c.reset_on_saturation);
  f.read("fresh_age_max", c.fresh_age_max);
  f.read("seed", c.seed);
  if (const json* d = f.child("distance")) read_distance(*d, "attack.distance", c.distance);
  f.finish();
}

std::vector<NodeId> sample_targets(const DirectedSocialGraph& g, std::span<const Label> predictions,
                                   std::size_t n, std::uint64_t seed) {
  std::vector<NodeId> eligible;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const NodeId v = node_id(i);
    if (g.label(v) == Label::Bot && predictions[i] == Label::Bot) eligible.push_back(v);
  }
  if (eligible.size() < n) {
    log().warn("only {} correctly classified bots; running {} of {} requested targets",
               eligible.size(), eligible.size(), n);
    n = eligible.size();
  }
  std::mt19937_64 rng(seed ^ 0x7461726765747321ULL);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
    std::swap(eligible[i], eligible[pick(rng)]);
  }
  eligible.resize(n);
  std::sort(eligible.begin(), eligible.end());
  return eligible;
}

struct TargetResult {
  TargetSummary summary;
  std::vector<AttackTrace> traces;
  std::vector<AttackTrace> random_traces;
  double attack_seconds = 0.0;
  double baseline_seconds = 0.0;
};

TargetResult run_target(const AttackContext& ctx, const CloakPool& pool, const AttackConfig& acfg,
                        AttackMode mode, std::size_t index, NodeId target) {
  TargetResult r;
  r.summary.index = index;
  r.summary.target = target;
  if (acfg.budget_delta == 0) return r;

  auto t0 = std::chrono::steady_clock::now();
  r.traces = mode == AttackMode::Editing ? bocloak_edit(ctx, pool, target, acfg)
                                         : bocloak_inject(ctx, pool, acfg, index);
  r.attack_seconds = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  r.random_traces = mode == AttackMode::Editing ? random_edit(ctx, target, acfg)
                                                : random_inject(ctx, acfg, index);
  r.baseline_seconds = seconds_since(t0);

  auto& s = r.summary;
  s.trials = r.traces.size();
  if (!r.traces.empty()) {
    s.target = r.traces.front().target;
    s.strategy = r.traces.front().strategy;
  }
  for (const auto& t : r.traces) {
    if (t.outcome == Outcome::Success) {
      ++s.successful_trials;
      if (!s.first_success) s.first_success = t.trial;
    }
    s.max_adds = std::max(s.max_adds, t.edits.add_count());
    s.max_deletes = std::max(s.max_deletes, t.edits.delete_count());
  }
  s.success = s.successful_trials > 0;
  s.random_success = any_success(r.random_traces);
  return r;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n_targets < 1) throw InvalidParams("n_targets must be at least 1");
  if (parallel_targets < 1) throw InvalidParams("parallel_targets must be at least 1");
  if (node_path.empty() != edge_path.empty()) {
    throw InvalidParams("node and edge paths must be given together");
  }
  if (attack.budget_delta > 0) attack.validate();
  geometry.validate();
}

void apply_master_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.gen.seed = seed;
  cfg.detector.seed = seed + 1;
  cfg.geometry.seed = seed + 2;
  cfg.attack.seed = seed + 3;
}

ojson to_json(const ExperimentConfig& cfg) {
  ojson j;
  j["seed"] = cfg.seed;
  j["preset"] = cfg.node_path.empty() ? ojson(cfg.preset_name) : ojson();
  j["node_path"] = cfg.node_path.string();
  j["edge_path"] = cfg.edge_path.string();
  j["gen"] = gen_json(cfg.gen);
  j["detector"] = detector_json(cfg.detector);
  j["geometry"] = train_json(cfg.geometry);
  j["attack"] = attack_json(cfg.attack);
  j["n_targets"] = cfg.n_targets;
  j["parallel_targets"] = cfg.parallel_targets;
  return j;
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig base) {
  Fields f(j, "config");
  // The master seed goes first so explicit component seeds still win.
  std::optional<std::uint64_t> seed;
  f.read_optional("seed", seed);
  if (seed) apply_master_seed(base, *seed);
  if (const json* p = f.child("preset"); p && !p->is_null()) {
    const auto name = p->get<std::string>();
    if (name != base.preset_name) {
      const auto seed = base.gen.seed;
      base.gen = preset(name);
      base.gen.seed = seed;
      base.preset_name = name;
    }
  }
  std::string node_path = base.node_path.string();
  std::string edge_path = base.edge_path.string();
  f.read("node_path", node_path);
  f.read("edge_path", edge_path);
  base.node_path = node_path;
  base.edge_path = edge_path;
  if (const json* g = f.child("gen")) read_gen(*g, base.gen);
  if (const json* d = f.child("detector")) read_detector(*d, base.detector);
  if (const json* t = f.child("geometry")) read_train(*t, base.geometry);
  if (const json* a = f.child("attack")) read_attack(*a, base.attack);
  f.read("n_targets", base.n_targets);
  f.read("parallel_targets", base.parallel_targets);
  f.finish();
  return base;
}

const char* to_string(AttackMode mode) noexcept {
  return mode == AttackMode::Editing ? "editing" : "injection";
}

ojson to_json(const ExperimentReport& report) {
  ojson j;
  j["mode"] = to_string(report.mode);
  j["requested_targets"] = report.requested_targets;
  j["n_targets"] = report.targets.size();
  j["successes"] = report.successes;
  j["misclassification_rate"] = report.misclassification_rate;
  j["random_successes"] = report.random_successes;
  j["random_rate"] = report.random_rate;
  j["candidate_count"] = report.candidate_count;
  j["detector_accuracy"] = report.detector_accuracy;
  ojson targets = ojson::array();
  for (const auto& t : report.targets) {
    targets.push_back({{"index", t.index},
                       {"target", index_of(t.target)},
                       {"success", t.success},
                       {"trials", t.trials},
                       {"successful_trials", t.successful_trials},
                       {"strategy", to_string(t.strategy)},
                       {"first_success", t.first_success ? ojson(*t.first_success) : ojson()},
                       {"max_adds", t.max_adds},
                       {"max_deletes", t.max_deletes},
                       {"random_success", t.random_success}});
  }
  j["targets"] = std::move(targets);
  j["config"] = report.config;
  return j;
}

ExperimentReport run_experiment(const ExperimentInputs& inputs, const ExperimentConfig& cfg,
                                AttackMode mode) {
  cfg.validate();
  DirectedSocialGraph& g = inputs.graph;
  if (!g.has_baseline()) throw InvalidParams("experiment graph has no baseline snapshot");
  g.reset_to_baseline();

  ExperimentReport report;
  report.mode = mode;
  report.requested_targets = cfg.n_targets;
  report.config = to_json(cfg);

  const std::vector<Label> predictions = inputs.detector.predict_all(g);
  report.detector_accuracy = accuracy(g, predictions);

  std::vector<NodeId> targets;
  if (mode == AttackMode::Editing) {
    targets = sample_targets(g, predictions, cfg.n_targets, cfg.attack.seed);
  } else {
    // Injected targets get the next free handle; the node exists only during a trial.
    targets.assign(cfg.n_targets, node_id(g.node_count()));
  }

  const auto t_setup = std::chrono::steady_clock::now();
  DistanceCache shared_cache;
  AttackContext ctx{g, predictions, inputs.geometry, inputs.detector, inputs.pools, &shared_cache};
  CloakPool pool;
  if (cfg.attack.budget_delta > 0) pool = prepare_cloaks(ctx, cfg.attack);
  report.candidate_count = pool.candidates.size();
  report.timing.setup_seconds = seconds_since(t_setup);

  std::vector<TargetResult> results(targets.size());
  const std::size_t workers = std::min(cfg.parallel_targets, targets.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      results[i] = run_target(ctx, pool, cfg.attack, mode, i, targets[i]);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          DirectedSocialGraph local = g;
          DistanceCache cache;
          AttackContext wctx{local, predictions, inputs.geometry, inputs.detector, inputs.pools,
                             &cache};
          for (std::size_t i = next++; i < targets.size(); i = next++) {
            results[i] = run_target(wctx, pool, cfg.attack, mode, i, targets[i]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  for (auto& r : results) {
    report.targets.push_back(r.summary);
    std::move(r.traces.begin(), r.traces.end(), std::back_inserter(report.traces));
    std::move(r.random_traces.begin(), r.random_traces.end(),
              std::back_inserter(report.random_traces));
    report.timing.attack_seconds += r.attack_seconds;
    report.timing.baseline_seconds += r.baseline_seconds;
  }
  const Recount rc = recount(report.targets);
  report.successes = rc.successes;
  report.random_successes = rc.random_successes;
  if (rc.targets > 0) {
    report.misclassification_rate =
        static_cast<double>(rc.successes) / static_cast<double>(rc.targets);
    report.random_rate =
        static_cast<double>(rc.random_successes) / static_cast<double>(rc.targets);
  }
  g.reset_to_baseline();
  return report;
}

DirectedSocialGraph build_graph(const ExperimentConfig& cfg) {
  if (!cfg.node_path.empty()) return load_dataset(cfg.node_path, cfg.edge_path);
  return generate(cfg.gen).graph;
}

Pipeline build_pipeline(const ExperimentConfig& cfg, std::ostream* train_log) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  Pipeline p{build_graph(cfg), std::nullopt, std::nullopt, 0.0};
  p.detector.emplace(train_detector(p.graph, cfg.detector));
  const auto predictions = p.detector->predict_all(p.graph);
  log().info("detector clean accuracy {:.4f}", accuracy(p.graph, predictions));
  p.geometry.emplace(train_geometry(p.graph, predictions, cfg.geometry, train_log));
  p.setup_seconds = seconds_since(t0);
  return p;
}

namespace {

ExperimentReport run_configured(const ExperimentConfig& cfg, AttackMode mode) {
  Pipeline p = build_pipeline(cfg);
  ExperimentInputs inputs{p.graph, *p.detector, p.geometry->geometry, p.geometry->pools};
  ExperimentReport report = run_experiment(inputs, cfg, mode);
  report.timing.setup_seconds += p.setup_seconds;
  return report;
}

}  // namespace

ExperimentReport run_editing_experiment(const ExperimentConfig& cfg) {
  return run_configured(cfg, AttackMode::Editing);
}

ExperimentReport run_injection_experiment(const ExperimentConfig& cfg) {
  return run_configured(cfg, AttackMode::Injection);
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.json");
    if (!out) throw FormatError("cannot write " + (dir / "report.json").string());
    out << to_json(report).dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "traces.jsonl");
    write_traces(out, report.traces);
    write_traces(out, report.random_traces);
  }
  std::ofstream out(dir / "timing.json");
  out << ojson{{"setup_seconds", report.timing.setup_seconds},
               {"attack_seconds", report.timing.attack_seconds},
               {"baseline_seconds", report.timing.baseline_seconds}}
             .dump(2)
      << '\n';
}

Recount recount(std::span<const TargetSummary> targets) {
  Recount r;
  r.targets = targets.size();
  for (const auto& t : targets) {
    r.successes += t.success ? 1 : 0;
    r.random_successes += t.random_success ? 1 : 0;
  }
  return r;
}

}  // namespace otcloak
