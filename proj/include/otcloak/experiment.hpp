#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "otcloak/attack.hpp"
#include "otcloak/datagen.hpp"
#include "otcloak/detector.hpp"
#include "otcloak/training.hpp"

namespace otcloak {

struct ExperimentConfig {
  /// Used when no dataset paths are given.
  std::string preset_name = "cresci-like";
  GenParams gen = preset("cresci-like");
  std::filesystem::path node_path;
  std::filesystem::path edge_path;
  DetectorConfig detector;
  TrainConfig geometry;
  AttackConfig attack;
  std::size_t n_targets = 50;
  /// Worker count; 1 runs targets sequentially.
  std::size_t parallel_targets = 1;
  std::uint64_t seed = 0;

  /// Throws InvalidParams.
  void validate() const;
};

/// Derives every component seed from one master seed.
void apply_master_seed(ExperimentConfig& cfg, std::uint64_t seed);

/// Full effective configuration with every default resolved.
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);
/// Starts from `base` and overrides the keys present in `j`. Unknown keys
/// throw InvalidParams.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

enum class AttackMode : std::uint8_t { Editing, Injection };
const char* to_string(AttackMode mode) noexcept;

struct TargetSummary {
  std::size_t index = 0;
  NodeId target{};  // the injected node's handle in injection mode
  bool success = false;
  std::size_t trials = 0;
  std::size_t successful_trials = 0;
  Strategy strategy = Strategy::Cloak;
  std::optional<std::size_t> first_success;
  std::size_t max_adds = 0;
  std::size_t max_deletes = 0;
  bool random_success = false;
};

struct Timing {
  double setup_seconds = 0.0;
  double attack_seconds = 0.0;
  double baseline_seconds = 0.0;
};

struct ExperimentReport {
  AttackMode mode = AttackMode::Editing;
  std::vector<TargetSummary> targets;
  std::size_t successes = 0;
  double misclassification_rate = 0.0;
  std::size_t random_successes = 0;
  double random_rate = 0.0;
  std::size_t candidate_count = 0;
  double detector_accuracy = 0.0;
  std::size_t requested_targets = 0;
  nlohmann::ordered_json config;
  /// Every recorded trial, cloak-guided then random.
  std::vector<AttackTrace> traces;
  std::vector<AttackTrace> random_traces;
  /// Wall clock; kept out of `to_json` so reports stay reproducible.
  Timing timing;
};

/// The report without traces and timing.
nlohmann::ordered_json to_json(const ExperimentReport& report);

/// Pre-built inputs for one experiment. The graph must carry a baseline.
struct ExperimentInputs {
  DirectedSocialGraph& graph;
  const Detector& detector;
  const OtGeometry& geometry;
  const NodePools& pools;
};

/// Runs the protocol on prepared inputs. Targets are the correctly
/// classified bots, sampled uniformly (fewer than n_targets shrinks the run
/// with a warning). A target succeeds when any trial flips it.
ExperimentReport run_experiment(const ExperimentInputs& inputs, const ExperimentConfig& cfg,
                                AttackMode mode);

/// Prepared pipeline: graph, detector, geometry and pools from a config.
struct Pipeline {
  DirectedSocialGraph graph;
  std::optional<MessagePassingDetector> detector;
  std::optional<TrainResult> geometry;
  double setup_seconds = 0.0;
};

/// Loads or generates the graph (with baseline).
DirectedSocialGraph build_graph(const ExperimentConfig& cfg);

/// Builds the graph and trains both models. `train_log` receives the
/// geometry trainer's per-epoch lines.
Pipeline build_pipeline(const ExperimentConfig& cfg, std::ostream* train_log = nullptr);

ExperimentReport run_editing_experiment(const ExperimentConfig& cfg);
ExperimentReport run_injection_experiment(const ExperimentConfig& cfg);

/// Writes report.json, traces.jsonl and timing.json into `dir`.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

/// Recomputes the rates of a report from its per-target summaries.
struct Recount {
  std::size_t targets = 0;
  std::size_t successes = 0;
  std::size_t random_successes = 0;
};
Recount recount(std::span<const TargetSummary> targets);

}  // namespace otcloak
