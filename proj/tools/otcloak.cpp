// Command-line front end: data generation, model training, candidate
// mining, attacks and report aggregation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "otcloak/attack.hpp"
#include "otcloak/cost_model.hpp"
#include "otcloak/datagen.hpp"
#include "otcloak/dataset_io.hpp"
#include "otcloak/detector.hpp"
#include "otcloak/errors.hpp"
#include "otcloak/experiment.hpp"
#include "otcloak/geometry.hpp"
#include "otcloak/log.hpp"
#include "otcloak/training.hpp"

namespace fs = std::filesystem;
using namespace otcloak;
using ojson = nlohmann::ordered_json;

namespace {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = ".";
};

struct DataOptions {
  std::string nodes;
  std::string edges;
  std::string preset;
};

struct ModelOptions {
  std::string detector;
  std::string geometry;
};

struct AttackOptions {
  std::optional<std::size_t> budget;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> n_targets;
  std::optional<std::size_t> parallel;
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> reuse_cap;
  bool no_flag_hb = false;
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--nodes", d.nodes, "Node file (JSON Lines)");
  cmd->add_option("--edges", d.edges, "Edge file (CSV)");
  cmd->add_option("--preset", d.preset, "Synthetic preset used when no files are given")
      ->check(CLI::IsMember(preset_names()));
}

void add_model_options(CLI::App* cmd, ModelOptions& m) {
  cmd->add_option("--detector", m.detector, "Detector checkpoint; trained in-run when omitted");
  cmd->add_option("--geometry", m.geometry, "Geometry checkpoint; trained in-run when omitted");
}

ExperimentConfig resolve_config(const GlobalOptions& global, const DataOptions& data) {
  ExperimentConfig cfg;
  if (global.seed) apply_master_seed(cfg, *global.seed);
  if (!global.config.empty()) {
    std::ifstream in(global.config);
    if (!in) throw InvalidParams("cannot open config file " + global.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidParams(std::string("config file is not valid JSON: ") + e.what());
    }
    cfg = config_from_json(j, cfg);
    if (global.seed) apply_master_seed(cfg, *global.seed);
  }
  if (!data.preset.empty() && data.preset != cfg.preset_name) {
    const auto seed = cfg.gen.seed;
    cfg.gen = preset(data.preset);
    cfg.gen.seed = seed;
    cfg.preset_name = data.preset;
  }
  if (!data.nodes.empty() || !data.edges.empty()) {
    if (data.nodes.empty() || data.edges.empty()) {
      throw InvalidParams("--nodes and --edges must be given together");
    }
    cfg.node_path = data.nodes;
    cfg.edge_path = data.edges;
  }
  return cfg;
}

void apply_attack_options(ExperimentConfig& cfg, const AttackOptions& a) {
  if (a.budget) cfg.attack.budget_delta = *a.budget;
  if (a.trials) cfg.attack.trials = *a.trials;
  if (a.n_targets) cfg.n_targets = *a.n_targets;
  if (a.parallel) cfg.parallel_targets = *a.parallel;
  if (a.top_k) cfg.attack.top_k = *a.top_k;
  if (a.reuse_cap) cfg.attack.reuse_cap = *a.reuse_cap;
  if (a.no_flag_hb) cfg.attack.flag_hb = false;
}

void write_json(const fs::path& path, const ojson& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Graph, detector and geometry for one command: loaded when checkpoints are
// given, trained otherwise.
struct Loaded {
  DirectedSocialGraph graph;
  std::optional<MessagePassingDetector> detector;
  std::optional<OtGeometry> geometry;
  NodePools pools;
  std::vector<Label> predictions;
};

Loaded load_inputs(const ExperimentConfig& cfg, const ModelOptions& models, bool need_geometry,
                   const fs::path& out_dir) {
  Loaded in{build_graph(cfg), std::nullopt, std::nullopt, {}, {}};
  if (!models.detector.empty()) {
    in.detector.emplace(load_detector(models.detector));
  } else {
    in.detector.emplace(train_detector(in.graph, cfg.detector));
  }
  in.predictions = in.detector->predict_all(in.graph);
  if (!need_geometry) return in;
  if (!models.geometry.empty()) {
    in.geometry.emplace(load_geometry(models.geometry));
    in.pools = sample_pools(in.graph, cfg.geometry.human_pool_size, cfg.geometry.bot_pool_size,
                            cfg.geometry.seed + 1);
  } else {
    std::ofstream train_log(out_dir / "train_log.jsonl");
    TrainResult tr = train_geometry(in.graph, in.predictions, cfg.geometry, &train_log);
    in.geometry.emplace(std::move(tr.geometry));
    in.pools = std::move(tr.pools);
  }
  return in;
}

int cmd_gen(const GlobalOptions& global, const DataOptions& data) {
  const ExperimentConfig cfg = resolve_config(global, data);
  fs::create_directories(global.out);
  const GeneratedGraph gen = generate(cfg.gen);
  save_dataset(gen.graph, fs::path(global.out) / "nodes.jsonl", fs::path(global.out) / "edges.csv");
  ojson meta{{"preset", cfg.preset_name},
             {"nodes", gen.graph.node_count()},
             {"edges", gen.graph.edge_count()},
             {"camouflaged", gen.camouflaged.size()}};
  meta["gen"] = to_json(cfg)["gen"];
  write_json(fs::path(global.out) / "dataset.json", meta);
  std::cout << meta.dump() << '\n';
  return 0;
}

int cmd_train_detector(const GlobalOptions& global, const DataOptions& data) {
  const ExperimentConfig cfg = resolve_config(global, data);
  fs::create_directories(global.out);
  const DirectedSocialGraph g = build_graph(cfg);
  const MessagePassingDetector det = train_detector(g, cfg.detector);
  save_detector(det, fs::path(global.out) / "detector.bin");
  const auto preds = det.predict_all(g);
  ojson j{{"train_accuracy", det.metadata().train_accuracy},
          {"test_accuracy", det.metadata().test_accuracy},
          {"clean_accuracy", accuracy(g, preds)}};
  j["detector"] = to_json(cfg)["detector"];
  write_json(fs::path(global.out) / "detector.json", j);
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_train_geometry(const GlobalOptions& global, const DataOptions& data,
                       const ModelOptions& models) {
  const ExperimentConfig cfg = resolve_config(global, data);
  const fs::path out(global.out);
  fs::create_directories(out);
  ModelOptions m = models;
  m.geometry.clear();
  Loaded in = load_inputs(cfg, m, true, out);
  save_geometry(*in.geometry, out / "geometry.bin");
  ojson j{{"humans_in_pool", in.pools.humans.size()}, {"bots_in_pool", in.pools.bots.size()}};
  j["geometry"] = to_json(cfg)["geometry"];
  write_json(out / "geometry.json", j);
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_candidates(const GlobalOptions& global, const DataOptions& data,
                   const ModelOptions& models, const AttackOptions& attack) {
  ExperimentConfig cfg = resolve_config(global, data);
  apply_attack_options(cfg, attack);
  const fs::path out(global.out);
  fs::create_directories(out);
  Loaded in = load_inputs(cfg, models, true, out);
  DistanceCache cache;
  CandidateParams cp;
  cp.tau_bdry = cfg.attack.tau_bdry;
  cp.degree_cap = cfg.attack.effective_degree_cap();
  cp.top_n = cfg.attack.top_boundary;
  const auto cands = boundary_candidates(*in.geometry, in.graph, in.predictions, in.pools.humans,
                                         in.pools.bots, cp, cfg.attack.distance, &cache);
  ojson arr = ojson::array();
  for (const auto& c : cands) {
    arr.push_back({{"node", index_of(c.node)}, {"margin", c.margin}, {"rank", c.rank}});
  }
  write_json(out / "candidates.json", arr);
  std::cout << ojson{{"candidates", cands.size()}}.dump() << '\n';
  return 0;
}

int cmd_attack(const GlobalOptions& global, const DataOptions& data, const ModelOptions& models,
               const AttackOptions& attack, AttackMode mode) {
  ExperimentConfig cfg = resolve_config(global, data);
  apply_attack_options(cfg, attack);
  cfg.validate();
  const fs::path out(global.out);
  fs::create_directories(out);
  Loaded in = load_inputs(cfg, models, true, out);
  ExperimentInputs inputs{in.graph, *in.detector, *in.geometry, in.pools};
  const ExperimentReport report = run_experiment(inputs, cfg, mode);
  write_report(report, out);
  std::cout << ojson{{"mode", to_string(mode)},
                     {"targets", report.targets.size()},
                     {"misclassification_rate", report.misclassification_rate},
                     {"random_rate", report.random_rate}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_eval(const GlobalOptions& global, const std::vector<std::string>& reports) {
  ojson rows = ojson::array();
  for (const auto& path : reports) {
    std::ifstream in(path);
    if (!in) throw InvalidParams("cannot open report " + path);
    nlohmann::json r;
    try {
      r = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path + ": " + e.what());
    }
    if (!r.contains("targets") || !r["targets"].is_array()) {
      throw FormatError(path + ": not an experiment report");
    }
    std::size_t n = 0;
    std::size_t ok = 0;
    std::size_t rnd = 0;
    for (const auto& t : r["targets"]) {
      ++n;
      ok += t.value("success", false) ? 1 : 0;
      rnd += t.value("random_success", false) ? 1 : 0;
    }
    const double rate = n ? static_cast<double>(ok) / static_cast<double>(n) : 0.0;
    const double rrate = n ? static_cast<double>(rnd) / static_cast<double>(n) : 0.0;
    const double reported = r.value("misclassification_rate", -1.0);
    rows.push_back({{"report", path},
                    {"mode", r.value("mode", "")},
                    {"budget", r["config"]["attack"].value("budget_delta", 0)},
                    {"targets", n},
                    {"misclassification_rate", rate},
                    {"random_rate", rrate},
                    {"margin_pp", 100.0 * (rate - rrate)},
                    {"consistent", reported == rate}});
  }
  fs::create_directories(global.out);
  write_json(fs::path(global.out) / "eval.json", rows);
  std::cout << rows.dump(2) << '\n';
  return 0;
}

void print_error(std::string_view kind, const std::string& message) {
  std::cerr << ojson{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OT-guided cloaking attacks on graph bot detectors"};
  app.require_subcommand(1);
  GlobalOptions global;
  app.add_option("--seed", global.seed, "Master seed for every component")->expected(1);
  app.add_option("--config", global.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", global.out, "Output directory");
  app.fallthrough();

  DataOptions data;
  ModelOptions models;
  AttackOptions attack;
  std::vector<std::string> reports;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--preset", data.preset, "Synthetic preset")
      ->check(CLI::IsMember(preset_names()));

  auto* tdet = app.add_subcommand("train-detector", "Train the message-passing detector");
  add_data_options(tdet, data);

  auto* tgeo = app.add_subcommand("train-geometry", "Train the OT geometry");
  add_data_options(tgeo, data);
  tgeo->add_option("--detector", models.detector, "Detector checkpoint");

  auto* cand = app.add_subcommand("candidates", "List boundary cloak candidates");
  add_data_options(cand, data);
  add_model_options(cand, models);
  cand->add_option("--budget", attack.budget, "Budget (sets the default degree cap)");

  auto add_attack = [&](CLI::App* cmd) {
    add_data_options(cmd, data);
    add_model_options(cmd, models);
    cmd->add_option("--budget", attack.budget, "Maximum added edges per trial");
    cmd->add_option("--trials", attack.trials, "Trials per target");
    cmd->add_option("--n-targets", attack.n_targets, "Number of targets");
    cmd->add_option("--parallel-targets", attack.parallel, "Worker threads over targets")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--top-k", attack.top_k, "OT-guided neighbor restriction size");
    cmd->add_option("--reuse-cap", attack.reuse_cap, "Successful reuses per cloak");
    cmd->add_flag("--no-flag-hb", attack.no_flag_hb, "Allow human -> target follows");
  };
  auto* edit = app.add_subcommand("attack-edit", "Node-editing attack experiment");
  add_attack(edit);
  auto* inject = app.add_subcommand("attack-inject", "Node-injection attack experiment");
  add_attack(inject);

  auto* eval = app.add_subcommand("eval", "Aggregate experiment reports");
  eval->add_option("reports", reports, "report.json files")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_gen(global, data);
    if (*tdet) return cmd_train_detector(global, data);
    if (*tgeo) return cmd_train_geometry(global, data, models);
    if (*cand) return cmd_candidates(global, data, models, attack);
    if (*edit) return cmd_attack(global, data, models, attack, AttackMode::Editing);
    if (*inject) return cmd_attack(global, data, models, attack, AttackMode::Injection);
    if (*eval) return cmd_eval(global, reports);
  } catch (const ParseError& e) {
    std::cerr << ojson{{"error", e.kind()}, {"message", e.what()}, {"line", e.line()}}.dump()
              << '\n';
    return 1;
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return 1;
  }
  return 2;
}
