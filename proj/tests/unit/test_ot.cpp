#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "otcloak/errors.hpp"
#include "otcloak/ot.hpp"

namespace otcloak {
namespace {

CostMatrix make_cost(std::size_t m, std::size_t n, std::vector<double> values, Vector a, Vector b) {
  CostMatrix c;
  c.values = Matrix(m, n);
  std::copy(values.begin(), values.end(), c.values.values().begin());
  c.a = std::move(a);
  c.b = std::move(b);
  return c;
}

CostMatrix random_cost(std::size_t m, std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(0.0, scale);
  std::vector<double> v(m * n);
  for (auto& x : v) x = u(rng);
  return make_cost(m, n, v, oracle::random_simplex(m, rng), oracle::random_simplex(n, rng));
}

SinkhornConfig tight(double eps) {
  SinkhornConfig cfg;
  cfg.epsilon = eps;
  cfg.max_iterations = 100000;
  cfg.marginal_tolerance = 1e-14;
  return cfg;
}

const CostMatrix kSwap = make_cost(2, 2, {0, 1, 1, 0}, {0.5, 0.5}, {0.5, 0.5});

TEST(Sinkhorn, OneByOne) {
  const auto c = make_cost(1, 1, {3.7}, {1.0}, {1.0});
  const auto p = sinkhorn(c);
  EXPECT_DOUBLE_EQ(p.plan(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(transport_cost(p, c), 3.7);
  EXPECT_NEAR(cost_gradient(p)(0, 0), 1.0, 1e-15);
}

TEST(Sinkhorn, SymmetricClosedForm) {
  const auto p = sinkhorn(kSwap, tight(1.0));
  // u = v by symmetry, so P = c^2 K with rows summing to 0.5.
  const double diag = 0.5 / (1.0 + std::exp(-1.0));
  const double off = 0.5 * std::exp(-1.0) / (1.0 + std::exp(-1.0));
  EXPECT_NEAR(p.plan(0, 0), diag, 1e-12);
  EXPECT_NEAR(p.plan(1, 1), diag, 1e-12);
  EXPECT_NEAR(p.plan(0, 1), off, 1e-12);
  EXPECT_NEAR(diag, 0.36553, 1e-5);
  EXPECT_NEAR(transport_cost(p, kSwap), 2.0 * off, 1e-12);
  EXPECT_NEAR(transport_cost(p, kSwap), 0.26894, 1e-5);
}

TEST(Sinkhorn, LargeEpsilonApproachesUniform) {
  const auto p = sinkhorn(kSwap, tight(1e6));
  for (double x : p.plan.values()) EXPECT_NEAR(x, 0.25, 1e-6);
}

TEST(Sinkhorn, ZeroCost) {
  std::mt19937_64 rng(4);
  const Vector a = oracle::random_simplex(3, rng);
  const Vector b = oracle::random_simplex(4, rng);
  const auto c = make_cost(3, 4, std::vector<double>(12, 0.0), a, b);
  const auto p = sinkhorn(c, tight(0.2));
  EXPECT_EQ(transport_cost(p, c), 0.0);
  const Matrix g = cost_gradient(p);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(g(i, j), a[i] * b[j], 1e-14);
}

TEST(Sinkhorn, ScalingIdentityAndMarginals) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 10; ++k) {
    const auto c = random_cost(7, 5, rng);
    const auto p = sinkhorn(c, tight(0.3));
    ASSERT_TRUE(p.converged);
    EXPECT_FALSE(p.log_domain);
    const Vector rows = row_masses(p.plan);
    const Vector cols = col_masses(p.plan);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(rows[i], c.a[i], 1e-13);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(cols[j], c.b[j], 1e-13);
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        EXPECT_NEAR(p.plan(i, j), p.u[i] * std::exp(-c.values(i, j) / 0.3) * p.v[j], 1e-15);
  }
}

TEST(Sinkhorn, LogDomainMatchesStandardOnSameKernel) {
  // exp(-C / eps) is unchanged when C and eps scale together.
  std::mt19937_64 rng(6);
  for (int k = 0; k < 5; ++k) {
    const auto c = random_cost(6, 6, rng);
    auto scaled = c;
    for (auto& x : scaled.values.values()) x /= 8.0;
    const auto standard = sinkhorn(c, tight(0.2));
    const auto logd = sinkhorn(scaled, tight(0.025));
    ASSERT_FALSE(standard.log_domain);
    ASSERT_TRUE(logd.log_domain);
    for (std::size_t i = 0; i < c.values.size(); ++i) {
      EXPECT_NEAR(standard.plan.data()[i], logd.plan.data()[i], 1e-12);
    }
  }
}

TEST(Sinkhorn, KernelUnderflowSwitchesToLogDomain) {
  const auto c = make_cost(2, 2, {0, 900, 900, 400}, {0.5, 0.5}, {0.5, 0.5});
  const auto p = sinkhorn(c, tight(1.0));
  EXPECT_TRUE(p.log_domain);
  EXPECT_LT(p.marginal_residual, 1e-10);
  for (double x : p.plan.values()) EXPECT_TRUE(std::isfinite(x));
}

TEST(Sinkhorn, DualObjectiveIsMonotone) {
  std::mt19937_64 rng(7);
  auto cfg = tight(0.1);
  cfg.max_iterations = 200;
  cfg.record_dual = true;
  const auto p = sinkhorn(random_cost(8, 6, rng), cfg);
  ASSERT_GE(p.dual_history.size(), 2u);
  for (std::size_t k = 1; k < p.dual_history.size(); ++k) {
    EXPECT_GE(p.dual_history[k], p.dual_history[k - 1] - 1e-12);
  }
}

TEST(Sinkhorn, MatchesExactOtAtSmallEpsilon) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    const std::size_t m = 2 + rng() % 3, n = 2 + rng() % 3;
    const auto c = random_cost(m, n, rng);
    oracle::Dense d(m, std::vector<double>(n));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = c.values(i, j);
    const double exact = oracle::exact_ot(d, c.a, c.b).value;
    auto cfg = tight(2e-3);
    cfg.marginal_tolerance = 1e-10;
    EXPECT_NEAR(sinkhorn(c, cfg).transport_cost, exact, 0.02 * exact);
  }
}

TEST(Sinkhorn, RejectsInvalidInput) {
  EXPECT_THROW(sinkhorn(make_cost(1, 2, {1, -1}, {1.0}, {0.5, 0.5})), InvalidCost);
  EXPECT_THROW(sinkhorn(make_cost(1, 2, {1, 1}, {1.0}, {0.5, 0.6})), InvalidCost);
  EXPECT_THROW(sinkhorn(make_cost(1, 2, {1, 1}, {1.0}, {1.0})), ShapeError);
  EXPECT_THROW(sinkhorn(make_cost(1, 1, {NAN}, {1.0}, {1.0})), InvalidCost);
  SinkhornConfig bad;
  bad.epsilon = 0.0;
  EXPECT_THROW(sinkhorn(kSwap, bad), InvalidParams);
  EXPECT_THROW(transport_cost(Matrix(2, 2), Matrix(2, 3)), ShapeError);
}

TEST(Entropy, RowMassesAndConditionalEntropies) {
  Matrix uniform(2, 2, 0.25);
  EXPECT_EQ(row_masses(uniform), (Vector{0.5, 0.5}));
  const auto hu = conditional_entropies(uniform);
  EXPECT_NEAR(hu.row, std::log(2.0), 1e-15);
  EXPECT_NEAR(hu.col, std::log(2.0), 1e-15);

  Matrix diag(2, 2);
  diag(0, 0) = diag(1, 1) = 0.5;
  const auto hd = conditional_entropies(diag);
  EXPECT_EQ(hd.row, 0.0);
  EXPECT_EQ(hd.col, 0.0);

  Matrix single(1, 3, 1.0 / 3.0);
  EXPECT_NEAR(row_masses(single)[0], 1.0, 1e-15);

  const auto p = sinkhorn(kSwap, tight(1.0));
  const Vector rho = row_masses(p);
  EXPECT_NEAR(rho[0], 0.5, 1e-14);
}

TEST(Entropy, ExpansionIdentity) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    Matrix p(4, 3);
    double total = 0.0;
    for (auto& x : p.values()) total += (x = u(rng));
    for (auto& x : p.values()) x /= total;
    const Vector a = row_masses(p);
    const Vector b = col_masses(p);
    double sa = 0.0, sb = 0.0;
    for (double x : a) sa += x * std::log(x);
    for (double x : b) sb += x * std::log(x);
    const auto h = conditional_entropies(p);
    EXPECT_NEAR(h.row + h.col, 2.0 * plan_entropy(p) + sa + sb, 1e-12);
  }
}

TEST(Gradients, EnvelopeMatchesFiniteDifferencesOfEntropicValue) {
  const auto cfg = tight(1.0);
  const Matrix grad = cost_gradient(sinkhorn(kSwap, cfg));
  auto value = [&](const std::vector<double>& flat) {
    CostMatrix c = kSwap;
    std::copy(flat.begin(), flat.end(), c.values.values().begin());
    return sinkhorn(c, cfg).entropic_objective;
  };
  const std::vector<double> x{0, 1, 1, 0};
  // Central differences at a zero entry would leave the nonnegative domain.
  std::vector<double> shifted = x;
  for (auto& v : shifted) v += 0.5;
  const auto fd = oracle::central_difference(value, shifted, 1e-5);
  const Matrix grad_shifted = [&] {
    CostMatrix c = kSwap;
    std::copy(shifted.begin(), shifted.end(), c.values.values().begin());
    return cost_gradient(sinkhorn(c, cfg));
  }();
  EXPECT_LT(oracle::relative_error({grad_shifted.values().begin(), grad_shifted.values().end()}, fd), 1e-3);
  // A constant shift leaves the plan unchanged.
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(grad.data()[i], grad_shifted.data()[i], 1e-12);
}

TEST(Gradients, PlanVjpMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  for (int k = 0; k < 5; ++k) {
    const auto base = random_cost(3, 4, rng);
    const auto cfg = tight(0.5);
    std::normal_distribution<double> d(0.0, 1.0);
    Matrix upstream(3, 4);
    for (auto& x : upstream.values()) x = d(rng);
    const Matrix analytic = plan_vjp(sinkhorn(base, cfg), upstream);
    auto f = [&](const std::vector<double>& flat) {
      CostMatrix c = base;
      std::copy(flat.begin(), flat.end(), c.values.values().begin());
      const auto p = sinkhorn(c, cfg);
      double s = 0.0;
      for (std::size_t i = 0; i < 12; ++i) s += upstream.data()[i] * p.plan.data()[i];
      return s;
    };
    const std::vector<double> x(base.values.values().begin(), base.values.values().end());
    const auto fd = oracle::central_difference(f, x, 1e-6);
    EXPECT_LT(oracle::relative_error({analytic.values().begin(), analytic.values().end()}, fd), 1e-5);
  }
}

TEST(Gradients, PlanVjpRejectsShapeMismatch) {
  const auto p = sinkhorn(kSwap, tight(1.0));
  EXPECT_THROW(plan_vjp(p, Matrix(3, 2)), ShapeError);
}

}  // namespace
}  // namespace otcloak
