#include "otcloak/detector.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>

#include "otcloak/binary_io.hpp"
#include "otcloak/errors.hpp"
#include "otcloak/kernels.hpp"
#include "otcloak/log.hpp"

namespace otcloak {
namespace {

constexpr std::string_view kMagic = "BOTDET1";

using Params = MessagePassingDetector::Params;
using Layer = MessagePassingDetector::Layer;

std::size_t bucket_of(std::size_t degree) {
  for (std::size_t b = 0; b < kDegreeBucketBounds.size(); ++b) {
    if (degree <= kDegreeBucketBounds[b]) return b;
  }
  return kDegreeBucketBounds.size();
}

std::size_t slot_count(const Params& p) { return 2 * p.num_relations; }

std::size_t slot_of(const Params& p, Relation rel, bool incoming) {
  const std::size_t r = std::min<std::size_t>(rel, p.num_relations - 1);
  return 2 * r + (incoming ? 1 : 0);
}

// Neighbor lists of v per (relation, direction) slot: v itself first, then
// adjacency order. Including v keeps the mean of an empty slot at the
// node's own state instead of zero.
std::vector<std::vector<NodeId>> slot_neighbors(const Params& p, const DirectedSocialGraph& g,
                                                NodeId v) {
  std::vector<std::vector<NodeId>> slots(slot_count(p), std::vector<NodeId>{v});
  for (const auto& n : g.out_neighbors(v)) slots[slot_of(p, n.relation, false)].push_back(n.node);
  for (const auto& n : g.in_neighbors(v)) slots[slot_of(p, n.relation, true)].push_back(n.node);
  return slots;
}

void gemv_add(const Matrix& w, std::span<const double> x, Vector& y) {
  Vector tmp(w.rows());
  kernels::active().gemv(w.data(), w.rows(), w.cols(), x.data(), tmp.data());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += tmp[i];
}

void relu_inplace(const Vector& z, Vector& h) {
  h.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) h[i] = z[i] > 0.0 ? z[i] : 0.0;
}

Vector input_pre(const Params& p, const Vector& x) {
  Vector z(p.hidden_dim, 0.0);
  gemv_add(p.w_in, x, z);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += p.b_in[i];
  return z;
}

// One message-passing layer at v. `state(u)` yields h_{l-1}(u). Both the
// full and the local forward pass go through this function, so they agree
// bit for bit.
template <typename StateFn>
Vector layer_pre(const Params& p, const Layer& layer, const std::vector<std::vector<NodeId>>& slots,
                 NodeId v, StateFn&& state, std::vector<Vector>* means = nullptr) {
  Vector z(p.hidden_dim, 0.0);
  gemv_add(layer.w_self, state(v), z);
  if (means) means->assign(slots.size(), Vector(p.hidden_dim, 0.0));
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (slots[k].empty()) continue;
    Vector mean(p.hidden_dim, 0.0);
    for (NodeId u : slots[k]) {
      const Vector& h = state(u);
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += h[i];
    }
    const double inv = 1.0 / static_cast<double>(slots[k].size());
    for (double& m : mean) m *= inv;
    gemv_add(layer.w_slot[k], mean, z);
    if (means) (*means)[k] = std::move(mean);
  }
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += layer.bias[i];
  return z;
}

double score_of(const Params& p, const Vector& h2) {
  Vector logits(2, 0.0);
  gemv_add(p.w_out, h2, logits);
  return (logits[1] + p.b_out[1]) - (logits[0] + p.b_out[0]);
}

Params init_params(std::size_t input_dim, const DetectorConfig& cfg) {
  if (cfg.hidden_dim == 0 || cfg.num_relations == 0) {
    throw InvalidParams("detector hidden size and relation count must be positive");
  }
  std::mt19937_64 rng(cfg.seed);
  auto uniform = [&](std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : m.values()) w = dist(rng);
    return m;
  };
  Params p;
  p.input_dim = input_dim;
  p.hidden_dim = cfg.hidden_dim;
  p.num_relations = cfg.num_relations;
  p.w_in = uniform(cfg.hidden_dim, input_dim);
  p.b_in.assign(cfg.hidden_dim, 0.0);
  for (auto& layer : p.layers) {
    layer.w_self = uniform(cfg.hidden_dim, cfg.hidden_dim);
    for (std::size_t k = 0; k < 2 * cfg.num_relations; ++k) {
      layer.w_slot.push_back(uniform(cfg.hidden_dim, cfg.hidden_dim));
    }
    layer.bias.assign(cfg.hidden_dim, 0.0);
  }
  p.w_out = uniform(2, cfg.hidden_dim);
  p.b_out.assign(2, 0.0);
  return p;
}

Params zeros_like(const Params& p) {
  Params z = p;
  z.w_in.fill(0.0);
  std::fill(z.b_in.begin(), z.b_in.end(), 0.0);
  for (auto& layer : z.layers) {
    layer.w_self.fill(0.0);
    for (auto& w : layer.w_slot) w.fill(0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  z.w_out.fill(0.0);
  std::fill(z.b_out.begin(), z.b_out.end(), 0.0);
  return z;
}

std::vector<std::span<double>> tensors(Params& p) {
  std::vector<std::span<double>> out{p.w_in.values(), p.b_in};
  for (auto& layer : p.layers) {
    out.push_back(layer.w_self.values());
    for (auto& w : layer.w_slot) out.push_back(w.values());
    out.push_back(layer.bias);
  }
  out.push_back(p.w_out.values());
  out.push_back(p.b_out);
  return out;
}

// w += a (x outer y)
void outer_add(Matrix& w, std::span<const double> x, std::span<const double> y) {
  for (std::size_t r = 0; r < x.size(); ++r) {
    if (x[r] != 0.0) kernels::active().axpy(x[r], y.data(), w.row(r).data(), y.size());
  }
}

Vector gemv_t(const Matrix& w, std::span<const double> x) {
  Vector y(w.cols());
  kernels::active().gemv_t(w.data(), w.rows(), w.cols(), x.data(), y.data());
  return y;
}

struct Trace {
  std::vector<std::vector<std::vector<NodeId>>> slots;  // node -> slot -> neighbors
  std::vector<Vector> x, z0, h0, z1, h1, z2, h2;
  std::vector<std::vector<Vector>> m1, m2;  // node -> slot -> mean state
};

Trace full_forward(const Params& p, const DirectedSocialGraph& g, bool keep_means) {
  const std::size_t n = g.node_count();
  Trace t;
  t.slots.resize(n);
  t.x.resize(n);
  t.z0.resize(n);
  t.h0.resize(n);
  t.z1.resize(n);
  t.h1.resize(n);
  t.z2.resize(n);
  t.h2.resize(n);
  if (keep_means) {
    t.m1.resize(n);
    t.m2.resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId v = node_id(i);
    t.slots[i] = slot_neighbors(p, g, v);
    t.x[i] = detector_input(g, v);
    t.z0[i] = input_pre(p, t.x[i]);
    relu_inplace(t.z0[i], t.h0[i]);
  }
  auto h0 = [&](NodeId u) -> const Vector& { return t.h0[index_of(u)]; };
  for (std::size_t i = 0; i < n; ++i) {
    t.z1[i] = layer_pre(p, p.layers[0], t.slots[i], node_id(i), h0, keep_means ? &t.m1[i] : nullptr);
    relu_inplace(t.z1[i], t.h1[i]);
  }
  auto h1 = [&](NodeId u) -> const Vector& { return t.h1[index_of(u)]; };
  for (std::size_t i = 0; i < n; ++i) {
    t.z2[i] = layer_pre(p, p.layers[1], t.slots[i], node_id(i), h1, keep_means ? &t.m2[i] : nullptr);
    relu_inplace(t.z2[i], t.h2[i]);
  }
  return t;
}

// Backpropagates dZ of one layer into the layer's parameters and into dH of
// the previous layer.
void layer_backward(const Layer& layer, Layer& grad, const Trace& t,
                    const std::vector<Vector>& h_prev, const std::vector<std::vector<Vector>>& means,
                    const std::vector<Vector>& dz, std::vector<Vector>& dh_prev) {
  const std::size_t n = dz.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vector& d = dz[i];
    outer_add(grad.w_self, d, h_prev[i]);
    for (std::size_t r = 0; r < d.size(); ++r) grad.bias[r] += d[r];
    const Vector back_self = gemv_t(layer.w_self, d);
    for (std::size_t r = 0; r < back_self.size(); ++r) dh_prev[i][r] += back_self[r];
    for (std::size_t k = 0; k < t.slots[i].size(); ++k) {
      const auto& nb = t.slots[i][k];
      if (nb.empty()) continue;
      outer_add(grad.w_slot[k], d, means[i][k]);
      Vector back = gemv_t(layer.w_slot[k], d);
      const double inv = 1.0 / static_cast<double>(nb.size());
      for (NodeId u : nb) {
        auto& target = dh_prev[index_of(u)];
        for (std::size_t r = 0; r < back.size(); ++r) target[r] += back[r] * inv;
      }
    }
  }
}

double prob_from_score(double s) {
  return s >= 0.0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
}

}  // namespace

std::vector<Label> Detector::predict_all(const DirectedSocialGraph& g) const {
  std::vector<Label> out;
  out.reserve(g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) out.push_back(predict(g, node_id(i)));
  return out;
}

double accuracy(const DirectedSocialGraph& g, std::span<const Label> predictions) {
  if (predictions.size() != g.node_count()) throw ShapeError("prediction count != node count");
  if (predictions.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == g.label(node_id(i))) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(predictions.size());
}

std::size_t detector_input_dim(std::size_t content_dim) {
  return 2 * kDegreeBuckets + 1 + content_dim;
}

Vector detector_input(const DirectedSocialGraph& g, NodeId v) {
  const auto& rec = g.node(v);
  const auto deg = degree_stats(g, v);
  Vector x(detector_input_dim(g.content_dim()), 0.0);
  x[bucket_of(deg.deg_in)] = 1.0;
  x[kDegreeBuckets + bucket_of(deg.deg_out)] = 1.0;
  x[2 * kDegreeBuckets] = rec.age_norm;
  std::copy(rec.content.begin(), rec.content.end(), x.begin() + 2 * kDegreeBuckets + 1);
  return x;
}

MessagePassingDetector::MessagePassingDetector(Params params, Metadata meta)
    : params_(std::move(params)), meta_(meta) {}

PredictionSet MessagePassingDetector::infer(const DirectedSocialGraph& g) const {
  if (detector_input_dim(g.content_dim()) != params_.input_dim) {
    throw ShapeError("graph content dimension does not match the detector");
  }
  const Trace t = full_forward(params_, g, false);
  PredictionSet out;
  out.labels.reserve(g.node_count());
  out.prob_bot.reserve(g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const double s = score_of(params_, t.h2[i]);
    out.labels.push_back(s >= 0.0 ? Label::Bot : Label::Human);
    out.prob_bot.push_back(prob_from_score(s));
  }
  return out;
}

double MessagePassingDetector::local_score(const DirectedSocialGraph& g, NodeId v) const {
  g.require(v);
  if (detector_input_dim(g.content_dim()) != params_.input_dim) {
    throw ShapeError("graph content dimension does not match the detector");
  }
  std::vector<NodeId> ring1 = ego_neighborhood(g, v, 1);
  ring1.push_back(v);
  std::vector<NodeId> ring2 = ego_neighborhood(g, v, 2);
  ring2.push_back(v);

  std::map<NodeId, Vector> h0;
  for (NodeId u : ring2) {
    Vector h;
    relu_inplace(input_pre(params_, detector_input(g, u)), h);
    h0.emplace(u, std::move(h));
  }
  auto state0 = [&](NodeId u) -> const Vector& { return h0.at(u); };
  std::map<NodeId, Vector> h1;
  for (NodeId u : ring1) {
    Vector h;
    relu_inplace(layer_pre(params_, params_.layers[0], slot_neighbors(params_, g, u), u, state0), h);
    h1.emplace(u, std::move(h));
  }
  auto state1 = [&](NodeId u) -> const Vector& { return h1.at(u); };
  Vector h2;
  relu_inplace(layer_pre(params_, params_.layers[1], slot_neighbors(params_, g, v), v, state1), h2);
  return score_of(params_, h2);
}

Label MessagePassingDetector::predict(const DirectedSocialGraph& g, NodeId v) const {
  return local_score(g, v) >= 0.0 ? Label::Bot : Label::Human;
}

std::vector<Label> MessagePassingDetector::predict_all(const DirectedSocialGraph& g) const {
  return infer(g).labels;
}

MessagePassingDetector train_detector(const DirectedSocialGraph& g, const DetectorConfig& cfg) {
  if (!(cfg.split_fraction > 0.0 && cfg.split_fraction <= 1.0)) {
    throw InvalidParams("split fraction must lie in (0, 1]");
  }
  if (!(cfg.weight_decay >= 0.0)) throw InvalidParams("weight decay must be nonnegative");
  const std::size_t n = g.node_count();
  Params p = init_params(detector_input_dim(g.content_dim()), cfg);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed + 1);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(cfg.split_fraction * static_cast<double>(n)));
  std::vector<char> is_train(n, 0);
  std::size_t train_h = 0;
  std::size_t train_b = 0;
  for (std::size_t k = 0; k < n_train; ++k) {
    is_train[order[k]] = 1;
    (g.label(node_id(order[k])) == Label::Bot ? train_b : train_h) += 1;
  }
  if (train_h == 0 || train_b == 0) {
    throw DegenerateSplit("training split holds a single class");
  }

  // Adam state over the flattened parameter tensors.
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kAdamEps = 1e-8;
  Params m1 = zeros_like(p);
  Params m2 = zeros_like(p);
  const double inv_train = 1.0 / static_cast<double>(n_train);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Trace t = full_forward(p, g, true);
    Params grad = zeros_like(p);
    const std::size_t h = p.hidden_dim;
    std::vector<Vector> dz2(n, Vector(h, 0.0));
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_train[i]) continue;
      Vector logits(2, 0.0);
      gemv_add(p.w_out, t.h2[i], logits);
      logits[0] += p.b_out[0];
      logits[1] += p.b_out[1];
      const double mx = std::max(logits[0], logits[1]);
      const double e0 = std::exp(logits[0] - mx);
      const double e1 = std::exp(logits[1] - mx);
      const double p1 = e1 / (e0 + e1);
      const int y = g.label(node_id(i)) == Label::Bot ? 1 : 0;
      loss -= std::log(std::max(y == 1 ? p1 : 1.0 - p1, 1e-300)) * inv_train;
      const Vector dl{(1.0 - p1 - (y == 0 ? 1.0 : 0.0)) * inv_train,
                      (p1 - (y == 1 ? 1.0 : 0.0)) * inv_train};
      outer_add(grad.w_out, dl, t.h2[i]);
      grad.b_out[0] += dl[0];
      grad.b_out[1] += dl[1];
      const Vector dh2 = gemv_t(p.w_out, dl);
      for (std::size_t r = 0; r < h; ++r) dz2[i][r] = t.z2[i][r] > 0.0 ? dh2[r] : 0.0;
    }

    std::vector<Vector> dh1(n, Vector(h, 0.0));
    layer_backward(p.layers[1], grad.layers[1], t, t.h1, t.m2, dz2, dh1);
    std::vector<Vector> dz1(n, Vector(h, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < h; ++r) dz1[i][r] = t.z1[i][r] > 0.0 ? dh1[i][r] : 0.0;
    }
    std::vector<Vector> dh0(n, Vector(h, 0.0));
    layer_backward(p.layers[0], grad.layers[0], t, t.h0, t.m1, dz1, dh0);
    for (std::size_t i = 0; i < n; ++i) {
      Vector dz0(h);
      for (std::size_t r = 0; r < h; ++r) dz0[r] = t.z0[i][r] > 0.0 ? dh0[i][r] : 0.0;
      outer_add(grad.w_in, dz0, t.x[i]);
      for (std::size_t r = 0; r < h; ++r) grad.b_in[r] += dz0[r];
    }

    const double step = static_cast<double>(epoch + 1);
    const double c1 = 1.0 - std::pow(kBeta1, step);
    const double c2 = 1.0 - std::pow(kBeta2, step);
    auto pt = tensors(p);
    auto gt = tensors(grad);
    auto mt = tensors(m1);
    auto vt = tensors(m2);
    for (std::size_t k = 0; k < pt.size(); ++k) {
      for (std::size_t i = 0; i < pt[k].size(); ++i) {
        const double gi = gt[k][i];
        mt[k][i] = kBeta1 * mt[k][i] + (1.0 - kBeta1) * gi;
        vt[k][i] = kBeta2 * vt[k][i] + (1.0 - kBeta2) * gi * gi;
        pt[k][i] -= cfg.learning_rate * ((mt[k][i] / c1) / (std::sqrt(vt[k][i] / c2) + kAdamEps) +
                                         cfg.weight_decay * pt[k][i]);
      }
    }
    otcloak::log().debug("detector epoch {} loss {:.6f}", epoch, loss);
  }

  MessagePassingDetector::Metadata meta;
  meta.seed = cfg.seed;
  meta.epochs = cfg.epochs;
  meta.split_fraction = cfg.split_fraction;
  MessagePassingDetector det(std::move(p), meta);
  const auto pred = det.infer(g).labels;
  std::size_t hit_train = 0;
  std::size_t hit_test = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (pred[i] != g.label(node_id(i))) continue;
    (is_train[i] ? hit_train : hit_test) += 1;
  }
  meta.train_accuracy = static_cast<double>(hit_train) / static_cast<double>(n_train);
  meta.test_accuracy =
      n > n_train ? static_cast<double>(hit_test) / static_cast<double>(n - n_train) : 0.0;
  return MessagePassingDetector(det.params(), meta);
}

void save_detector(const MessagePassingDetector& det, const std::filesystem::path& path) {
  const auto& p = det.params();
  const auto& meta = det.metadata();
  binio::Writer w(kMagic);
  w.u64(p.input_dim);
  w.u64(p.hidden_dim);
  w.u64(p.num_relations);
  w.u64(meta.seed);
  w.u64(meta.epochs);
  w.f64(meta.split_fraction);
  w.f64(meta.train_accuracy);
  w.f64(meta.test_accuracy);
  w.block(p.w_in.values());
  w.block(p.b_in);
  for (const auto& layer : p.layers) {
    w.block(layer.w_self.values());
    for (const auto& ws : layer.w_slot) w.block(ws.values());
    w.block(layer.bias);
  }
  w.block(p.w_out.values());
  w.block(p.b_out);
  w.save(path);
}

MessagePassingDetector load_detector(const std::filesystem::path& path) {
  binio::Reader r(path, kMagic);
  Params p;
  MessagePassingDetector::Metadata meta;
  p.input_dim = r.u64();
  p.hidden_dim = r.u64();
  p.num_relations = r.u64();
  meta.seed = r.u64();
  meta.epochs = r.u64();
  meta.split_fraction = r.f64();
  meta.train_accuracy = r.f64();
  meta.test_accuracy = r.f64();
  if (p.input_dim == 0 || p.hidden_dim == 0 || p.num_relations == 0 || p.num_relations > 255) {
    throw FormatError("invalid detector dimensions");
  }
  p.w_in = r.matrix(p.hidden_dim, p.input_dim);
  p.b_in = r.vector(p.hidden_dim);
  for (auto& layer : p.layers) {
    layer.w_self = r.matrix(p.hidden_dim, p.hidden_dim);
    for (std::size_t k = 0; k < 2 * p.num_relations; ++k) {
      layer.w_slot.push_back(r.matrix(p.hidden_dim, p.hidden_dim));
    }
    layer.bias = r.vector(p.hidden_dim);
  }
  p.w_out = r.matrix(2, p.hidden_dim);
  p.b_out = r.vector(2);
  r.expect_end();
  return MessagePassingDetector(std::move(p), meta);
}

FixtureDetector::Stats FixtureDetector::stats(const DirectedSocialGraph& g, NodeId v) {
  Stats s{0.0, 0.0, 0.0, 0.0};
  for (const auto& n : g.out_neighbors(v)) s[g.label(n.node) == Label::Human ? 0 : 1] += 1.0;
  for (const auto& n : g.in_neighbors(v)) s[g.label(n.node) == Label::Human ? 2 : 3] += 1.0;
  return s;
}

FixtureDetector FixtureDetector::fit(const DirectedSocialGraph& g) {
  Stats hs{}, bs{};
  std::size_t nh = 0;
  std::size_t nb = 0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const NodeId v = node_id(i);
    const Stats s = stats(g, v);
    const bool bot = g.label(v) == Label::Bot;
    auto& acc = bot ? bs : hs;
    for (std::size_t k = 0; k < 4; ++k) acc[k] += s[k];
    (bot ? nb : nh) += 1;
  }
  if (nh == 0 || nb == 0) throw DegenerateSplit("fixture detector needs both classes");
  for (std::size_t k = 0; k < 4; ++k) {
    hs[k] /= static_cast<double>(nh);
    bs[k] /= static_cast<double>(nb);
  }
  return {hs, bs};
}

Label FixtureDetector::predict(const DirectedSocialGraph& g, NodeId v) const {
  const Stats s = stats(g, v);
  double dh = 0.0;
  double db = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    dh += (s[k] - human_[k]) * (s[k] - human_[k]);
    db += (s[k] - bot_[k]) * (s[k] - bot_[k]);
  }
  return dh < db ? Label::Human : Label::Bot;
}

}  // namespace otcloak
