#include "otcloak/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "otcloak/errors.hpp"

namespace otcloak {
namespace {

double draw_beta(const AgeProfile& p, std::mt19937_64& rng) {
  std::gamma_distribution<double> ga(p.alpha, 1.0);
  std::gamma_distribution<double> gb(p.beta, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return std::clamp(x / (x + y), 0.0, 1.0);
}

Vector draw_content(std::size_t dim, double mean, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(mean, 1.0);
  Vector c(dim);
  for (double& x : c) x = nd(rng);
  return c;
}

std::size_t draw_degree(double mean, std::size_t cap, std::mt19937_64& rng) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::size_t> pd(mean);
  return std::min(pd(rng), cap);
}

}  // namespace

void GenParams::validate() const {
  if (n_humans < 2 || n_bots < 2) throw InvalidParams("need at least two nodes per class");
  const double n1 = static_cast<double>(n_humans + n_bots - 1);
  if (human_mean_degree < 0.0 || bot_mean_degree < 0.0) {
    throw InvalidParams("mean degrees must be nonnegative");
  }
  if (human_mean_degree > n1 || bot_mean_degree > n1) {
    throw InvalidParams("requested mean degree exceeds n - 1");
  }
  if (!(homophily >= 0.0 && homophily <= 1.0)) throw InvalidParams("homophily must lie in [0,1]");
  if (!(bot_to_human_bias >= 0.0 && bot_to_human_bias <= 1.0)) {
    throw InvalidParams("bot_to_human_bias must lie in [0,1]");
  }
  if (!(camouflage_fraction >= 0.0 && camouflage_fraction <= 1.0)) {
    throw InvalidParams("camouflage_fraction must lie in [0,1]");
  }
  if (human_age.alpha <= 0.0 || human_age.beta <= 0.0 || bot_age.alpha <= 0.0 ||
      bot_age.beta <= 0.0) {
    throw InvalidParams("age profile parameters must be positive");
  }
}

GenParams preset(std::string_view name) {
  GenParams p;
  if (name == "cresci-like") {
    p.content_separation = 3.0;
    return p;
  }
  if (name == "twibot-like") {
    p.n_humans = 860;
    p.n_bots = 140;
    p.human_mean_degree = 7.00;
    p.bot_mean_degree = 3.56;
    p.content_separation = 2.0;
    return p;
  }
  if (name == "botsim-like") {
    p.n_humans = 191;
    p.n_bots = 100;
    p.human_mean_degree = 59.12;
    p.bot_mean_degree = 19.23;
    p.content_separation = 1.0;
    return p;
  }
  throw InvalidParams("unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() { return {"cresci-like", "twibot-like", "botsim-like"}; }

GeneratedGraph generate(const GenParams& params) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  const std::size_t nh = params.n_humans;
  const std::size_t nb = params.n_bots;
  const std::size_t n = nh + nb;
  const double half_sep = params.content_separation / 2.0;

  GeneratedGraph out{DirectedSocialGraph(params.content_dim), {}};
  DirectedSocialGraph& g = out.graph;

  // Camouflaged bots are the first bots after a seeded shuffle.
  std::vector<std::size_t> bot_order(nb);
  for (std::size_t i = 0; i < nb; ++i) bot_order[i] = i;
  std::shuffle(bot_order.begin(), bot_order.end(), rng);
  const auto n_camo = static_cast<std::size_t>(
      std::llround(params.camouflage_fraction * static_cast<double>(nb)));
  std::vector<char> camo(nb, 0);
  for (std::size_t i = 0; i < n_camo; ++i) camo[bot_order[i]] = 1;

  for (std::size_t i = 0; i < nh; ++i) {
    NodeRecord rec;
    rec.label = Label::Human;
    rec.age_norm = draw_beta(params.human_age, rng);
    rec.content = draw_content(params.content_dim, -half_sep, rng);
    g.add_node(std::move(rec));
  }
  for (std::size_t i = 0; i < nb; ++i) {
    NodeRecord rec;
    rec.label = Label::Bot;
    const bool c = camo[i] != 0;
    rec.age_norm = draw_beta(c ? params.human_age : params.bot_age, rng);
    rec.content = draw_content(params.content_dim, c ? -half_sep : half_sep, rng);
    const NodeId id = g.add_node(std::move(rec));
    if (c) out.camouflaged.push_back(id);
  }

  // Camouflage edges come out of the class degree budgets so the class
  // means stay on target. A camouflaged bot follows 1-3 humans and is
  // followed by 1-2 other camouflaged bots, so both its degree profile and
  // its followers look human.
  std::uniform_int_distribution<std::size_t> pick_human(0, nh - 1);
  std::uniform_int_distribution<std::size_t> out_deg(1, 3);
  std::uniform_int_distribution<std::size_t> in_deg(1, 2);
  const std::vector<NodeId>& camos = out.camouflaged;
  double bot_budget = params.bot_mean_degree * static_cast<double>(nb);
  std::size_t camo_edges = 0;
  for (NodeId b : camos) {
    const std::size_t k_out = std::min<std::size_t>(out_deg(rng), nh);
    const std::size_t k_in = std::min<std::size_t>(in_deg(rng), camos.size() - 1);
    const double cost = static_cast<double>(k_out + 2 * k_in);
    if (bot_budget < cost) break;
    for (std::size_t added = 0; added < k_out;) {
      if (g.add_edge(b, node_id(pick_human(rng)))) ++added;
    }
    std::uniform_int_distribution<std::size_t> pick_camo(0, camos.size() - 1);
    for (std::size_t added = 0; added < k_in;) {
      const NodeId src = camos[pick_camo(rng)];
      if (src != b && g.add_edge(src, b)) ++added;
    }
    bot_budget -= cost;
    camo_edges += k_out;
  }

  const double human_mean = std::max(
      0.0, params.human_mean_degree - static_cast<double>(camo_edges) / static_cast<double>(nh));
  const double bot_mean = nb > n_camo ? bot_budget / static_cast<double>(nb - n_camo) : 0.0;

  // Degree stubs per class, paired with homophily bias.
  std::vector<std::size_t> stubs_h;
  std::vector<std::size_t> stubs_b;
  for (std::size_t i = 0; i < n; ++i) {
    const bool is_bot = i >= nh;
    if (is_bot && camo[i - nh]) continue;
    const std::size_t k = draw_degree(is_bot ? bot_mean : human_mean, n - 1, rng);
    auto& stubs = is_bot ? stubs_b : stubs_h;
    stubs.insert(stubs.end(), k, i);
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto pop = [&](std::vector<std::size_t>& stubs) {
    std::uniform_int_distribution<std::size_t> pick(0, stubs.size() - 1);
    const std::size_t j = pick(rng);
    std::swap(stubs[j], stubs.back());
    const std::size_t v = stubs.back();
    stubs.pop_back();
    return v;
  };
  constexpr int kRetries = 10;
  while (stubs_h.size() + stubs_b.size() >= 2) {
    const double total = static_cast<double>(stubs_h.size() + stubs_b.size());
    const bool first_bot = unif(rng) * total < static_cast<double>(stubs_b.size());
    const std::size_t u = pop(first_bot ? stubs_b : stubs_h);
    bool same = unif(rng) < params.homophily;
    auto& own = first_bot ? stubs_b : stubs_h;
    auto& other = first_bot ? stubs_h : stubs_b;
    if (same && own.empty()) same = false;
    if (!same && other.empty()) same = true;
    auto& partner_pool = same ? own : other;

    bool placed = false;
    for (int attempt = 0; attempt < kRetries && !placed; ++attempt) {
      const std::size_t v = pop(partner_pool);
      if (v == u) {
        partner_pool.push_back(v);
        continue;
      }
      std::size_t src = u;
      std::size_t dst = v;
      const bool u_bot = u >= nh;
      const bool v_bot = v >= nh;
      if (u_bot != v_bot) {
        const bool bot_first = unif(rng) < params.bot_to_human_bias;
        const std::size_t bot = u_bot ? u : v;
        const std::size_t human = u_bot ? v : u;
        src = bot_first ? bot : human;
        dst = bot_first ? human : bot;
      } else if (unif(rng) < 0.5) {
        std::swap(src, dst);
      }
      if (g.add_edge(node_id(src), node_id(dst))) {
        placed = true;
      } else {
        partner_pool.push_back(v);
      }
      if (partner_pool.empty()) break;
    }
  }

  g.snapshot_baseline();
  return out;
}

}  // namespace otcloak
