#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "otcloak/graph.hpp"
#include "otcloak/matrix.hpp"

namespace otcloak {

/// Black-box node classifier: a label out, nothing else.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual Label predict(const DirectedSocialGraph& g, NodeId v) const = 0;
  virtual std::vector<Label> predict_all(const DirectedSocialGraph& g) const;
  virtual std::string name() const = 0;
};

struct PredictionSet {
  std::vector<Label> labels;
  Vector prob_bot;
};

double accuracy(const DirectedSocialGraph& g, std::span<const Label> predictions);

struct DetectorConfig {
  std::size_t hidden_dim = 16;
  std::size_t num_relations = 2;
  std::size_t epochs = 200;
  double learning_rate = 0.01;
  double split_fraction = 0.7;
  /// Decoupled L2 shrinkage applied with every Adam step.
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

/// Degree bucket boundaries for the one-hot degree features: a degree d
/// falls in the first bucket whose upper bound is >= d.
inline constexpr std::array<std::size_t, 6> kDegreeBucketBounds{0, 1, 2, 4, 8, 16};
inline constexpr std::size_t kDegreeBuckets = kDegreeBucketBounds.size() + 1;

/// Label-free detector input: one-hot in-degree and out-degree buckets, the
/// account age and the content vector.
Vector detector_input(const DirectedSocialGraph& g, NodeId v);
std::size_t detector_input_dim(std::size_t content_dim);

/// Two-layer relational message-passing classifier.
///
/// Layer l computes
///   h_l(v) = relu(W_self h_{l-1}(v) + sum_k W_k mean_{u in {v} + N_k(v)} h_{l-1}(u) + b)
/// where k runs over (relation, direction) slots and h_0 is an input
/// projection. Relation tags beyond the configured count share the last slot.
class MessagePassingDetector final : public Detector {
 public:
  struct Layer {
    Matrix w_self;               // hidden x hidden
    std::vector<Matrix> w_slot;  // 2 * num_relations, hidden x hidden
    Vector bias;

    friend bool operator==(const Layer&, const Layer&) = default;
  };

  struct Params {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t num_relations = 0;
    Matrix w_in;  // hidden x input
    Vector b_in;
    std::array<Layer, 2> layers;
    Matrix w_out;  // 2 x hidden
    Vector b_out;

    friend bool operator==(const Params&, const Params&) = default;
  };

  struct Metadata {
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    double split_fraction = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;

    friend bool operator==(const Metadata&, const Metadata&) = default;
  };

  MessagePassingDetector(Params params, Metadata meta);

  /// Logit-form (bot minus human) score; predictions tie toward bot.
  Label predict(const DirectedSocialGraph& g, NodeId v) const override;
  std::vector<Label> predict_all(const DirectedSocialGraph& g) const override;
  std::string name() const override { return "message-passing"; }

  /// Bot probability for every node from one full forward pass.
  PredictionSet infer(const DirectedSocialGraph& g) const;
  /// Bot-minus-human logit of v computed over its 2-hop receptive field only.
  double local_score(const DirectedSocialGraph& g, NodeId v) const;

  const Params& params() const noexcept { return params_; }
  const Metadata& metadata() const noexcept { return meta_; }

  friend bool operator==(const MessagePassingDetector& a, const MessagePassingDetector& b) {
    return a.params_ == b.params_ && a.meta_ == b.meta_;
  }

 private:
  Params params_;
  Metadata meta_;
};

/// Full-batch cross-entropy training with Adam on a seeded node split.
/// Throws DegenerateSplit when the training split holds a single class.
MessagePassingDetector train_detector(const DirectedSocialGraph& g, const DetectorConfig& cfg);

/// Versioned binary checkpoint ("BOTDET1").
void save_detector(const MessagePassingDetector& det, const std::filesystem::path& path);
MessagePassingDetector load_detector(const std::filesystem::path& path);

/// Nearest-centroid classifier on (out_h, out_b, in_h, in_b) neighbor-label
/// counts. Deterministic and easy to reason about in tests.
class FixtureDetector final : public Detector {
 public:
  using Stats = std::array<double, 4>;

  FixtureDetector(Stats human_centroid, Stats bot_centroid)
      : human_(human_centroid), bot_(bot_centroid) {}

  /// Centroids are class means over every labeled node of `g`.
  static FixtureDetector fit(const DirectedSocialGraph& g);
  static Stats stats(const DirectedSocialGraph& g, NodeId v);

  Label predict(const DirectedSocialGraph& g, NodeId v) const override;
  std::string name() const override { return "fixture-centroid"; }

  const Stats& human_centroid() const noexcept { return human_; }
  const Stats& bot_centroid() const noexcept { return bot_; }

 private:
  Stats human_;
  Stats bot_;
};

}  // namespace otcloak
