#include "otcloak/cloak_sampler.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "otcloak/errors.hpp"

namespace otcloak {
namespace {

Reach reach_of(std::size_t humans, std::size_t bots) {
  if (humans > 0 && bots > 0) return Reach::Both;
  if (humans > 0) return Reach::Humans;
  if (bots > 0) return Reach::Bots;
  return Reach::Nobody;
}

std::pair<std::size_t, std::size_t> count_labels(const DirectedSocialGraph& g,
                                                 std::span<const Neighbor> adj) {
  std::size_t humans = 0;
  std::size_t bots = 0;
  for (const auto& n : adj) {
    (g.label(n.node) == Label::Human ? humans : bots) += 1;
  }
  return {humans, bots};
}

std::size_t draw(std::span<const double> weights, std::mt19937_64& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  std::uniform_real_distribution<double> unif(0.0, total);
  const double x = unif(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last = i;
    if (x < acc) return i;
  }
  return last;
}

}  // namespace

const char* to_string(Reach reach) noexcept {
  switch (reach) {
    case Reach::Humans: return "humans";
    case Reach::Bots: return "bots";
    case Reach::Both: return "humans_and_bots";
    case Reach::Nobody: return "nobody";
  }
  return "nobody";
}

StructuralCategory StructuralCategory::from_index(int index) {
  if (index < 0 || index >= kCategoryCount) throw InvalidParams("category index out of range");
  return {static_cast<Reach>(index / 4), static_cast<Reach>(index % 4)};
}

std::string StructuralCategory::name() const {
  return std::string("follow_") + to_string(outgoing) + "_followed_by_" + to_string(incoming);
}

StructuralCategory structural_category(const DirectedSocialGraph& g, NodeId t) {
  const CloakProfile p = make_profile(g, t, 0);
  return p.category;
}

CloakProfile make_profile(const DirectedSocialGraph& g, NodeId t, std::size_t rank) {
  g.require(t);
  CloakProfile p;
  p.node = t;
  p.rank = rank;
  std::tie(p.out_h, p.out_b) = count_labels(g, g.out_neighbors(t));
  std::tie(p.in_h, p.in_b) = count_labels(g, g.in_neighbors(t));
  p.category = {reach_of(p.out_h, p.out_b), reach_of(p.in_h, p.in_b)};
  p.e = p.out_h + p.out_b + p.in_h + p.in_b;
  p.eta = p.in_h > 0;
  return p;
}

std::vector<CloakProfile> make_profiles(const DirectedSocialGraph& g,
                                        std::span<const CloakCandidate> candidates) {
  std::vector<CloakProfile> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(make_profile(g, c.node, c.rank));
  return out;
}

SamplingWeights importance_weights(std::span<const CloakProfile> profiles) {
  SamplingWeights w;
  if (profiles.empty()) return w;

  std::map<int, std::vector<const CloakProfile*>> buckets;
  std::size_t r_max = 1;
  for (const auto& p : profiles) {
    buckets[p.category.index()].push_back(&p);
    r_max = std::max(r_max, p.rank);
  }
  const double total = static_cast<double>(profiles.size());

  std::map<int, double> e_bar;
  std::map<int, double> r_bar;
  double e_min = 0.0;
  bool first = true;
  for (const auto& [c, members] : buckets) {
    double es = 0.0;
    double rs = 0.0;
    for (const auto* p : members) {
      es += static_cast<double>(p->e);
      rs += static_cast<double>(p->rank);
    }
    const double n = static_cast<double>(members.size());
    e_bar[c] = es / n;
    r_bar[c] = rs / n;
    e_min = first ? e_bar[c] : std::min(e_min, e_bar[c]);
    first = false;
  }

  double cat_sum = 0.0;
  for (const auto& [c, members] : buckets) {
    const double edges = e_min / std::max(e_bar[c], 1e-6);
    const double wc = edges * edges / (1.0 + r_bar[c] / total);
    w.p_category[c] = wc;
    cat_sum += wc;

    auto& cloaks = w.p_cloak[c];
    double in_sum = 0.0;
    for (const auto* p : members) {
      const double wt = 1.0 / (1.0 + static_cast<double>(p->e)) /
                        (1.0 + static_cast<double>(p->rank) / static_cast<double>(r_max)) *
                        (p->eta ? 0.5 : 1.0);
      cloaks.emplace_back(p->node, wt);
      in_sum += wt;
    }
    for (auto& [t, pt] : cloaks) pt /= in_sum;
  }
  if (cat_sum > 0.0) {
    for (auto& [c, pc] : w.p_category) pc /= cat_sum;
  } else {
    // Some category averages zero edges, so e_min = 0 zeroes every weight.
    for (auto& [c, pc] : w.p_category) pc = 1.0 / static_cast<double>(w.p_category.size());
  }
  return w;
}

NodeId sample_cloak(std::span<const NodeId> candidates, const SamplingWeights& weights,
                    UseCounts& counts, const SampleOptions& opts, std::mt19937_64& rng) {
  if (candidates.empty()) throw EmptyPool("no cloak candidates to sample from");
  if (opts.reuse_cap == 0) throw InvalidParams("reuse cap must be at least 1");
  const std::set<NodeId> allowed(candidates.begin(), candidates.end());
  auto use = [&](NodeId t) {
    auto it = counts.find(t);
    return it == counts.end() ? std::size_t{0} : it->second;
  };
  auto under_cap = [&](NodeId t) { return allowed.count(t) > 0 && use(t) < opts.reuse_cap; };

  auto restricted_mass = [&]() {
    std::vector<int> cats;
    std::vector<double> mass;
    for (const auto& [c, pc] : weights.p_category) {
      double alpha = 0.0;
      for (const auto& [t, pt] : weights.p_cloak.at(c)) {
        if (under_cap(t)) alpha += pt;
      }
      cats.push_back(c);
      mass.push_back(pc * alpha);
    }
    return std::pair{cats, mass};
  };

  auto [cats, mass] = restricted_mass();
  double total = 0.0;
  for (double m : mass) total += m;
  if (!(total > 0.0) && opts.reset_on_saturation) {
    for (NodeId t : candidates) counts.erase(t);
    std::tie(cats, mass) = restricted_mass();
    for (double m : mass) total += m;
  }

  std::vector<double> cloak_w;
  if (total > 0.0) {
    const int c = cats[draw(mass, rng)];
    const auto& cloaks = weights.p_cloak.at(c);
    for (const auto& [t, pt] : cloaks) cloak_w.push_back(under_cap(t) ? pt : 0.0);
    return cloaks[draw(cloak_w, rng)].first;
  }

  // Every candidate is at the cap: sample from the original distributions.
  std::vector<double> cat_w;
  for (const auto& [c, pc] : weights.p_category) cat_w.push_back(pc);
  const int c = cats[draw(cat_w, rng)];
  const auto& cloaks = weights.p_cloak.at(c);
  for (const auto& [t, pt] : cloaks) cloak_w.push_back(pt);
  return cloaks[draw(cloak_w, rng)].first;
}

}  // namespace otcloak
