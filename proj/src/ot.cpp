#include "otcloak/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "otcloak/errors.hpp"
#include "otcloak/kernels.hpp"
#include "otcloak/log.hpp"

namespace otcloak {
namespace {

constexpr double kLogDomainEpsilon = 0.05;
constexpr double kKernelFloor = 1e-300;
constexpr double kMarginalSlack = 1e-10;

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

void check_simplex(const Vector& w, const char* name) {
  double sum = 0.0;
  for (double x : w) {
    if (!std::isfinite(x) || x <= 0.0) {
      throw InvalidCost(std::string("marginal ") + name + " must be strictly positive");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > kMarginalSlack) {
    throw InvalidCost(std::string("marginal ") + name + " does not sum to one");
  }
}

double log_sum_exp(const double* values, std::size_t n) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) hi = std::max(hi, values[i]);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::exp(values[i] - hi);
  return hi + std::log(acc);
}

void finish(TransportPlan& out, const CostMatrix& cost) {
  out.marginal_residual = std::max(out.row_residual, out.col_residual);
  out.transport_cost = transport_cost(out.plan, cost.values);
  out.entropic_objective = entropic_objective(out, cost);
}

TransportPlan solve_scaling(const CostMatrix& cost, const Matrix& kernel, const SinkhornConfig& cfg) {
  const std::size_t m = cost.rows();
  const std::size_t n = cost.cols();
  const auto& k = kernels::active();

  TransportPlan out;
  out.epsilon = cfg.epsilon;
  out.a = cost.a;
  out.b = cost.b;
  Vector u(m, 1.0), v(n, 1.0), kv(m), ktu(n);

  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    k.gemv(kernel.data(), m, n, v.data(), kv.data());
    for (std::size_t i = 0; i < m; ++i) {
      if (!(kv[i] > 0.0)) throw NumericalFailure("kernel row " + std::to_string(i) + " vanished");
      u[i] = cost.a[i] / kv[i];
    }
    k.gemv_t(kernel.data(), m, n, u.data(), ktu.data());
    for (std::size_t j = 0; j < n; ++j) {
      if (!(ktu[j] > 0.0)) throw NumericalFailure("kernel column " + std::to_string(j) + " vanished");
      v[j] = cost.b[j] / ktu[j];
    }
    out.iterations = it + 1;

    k.gemv(kernel.data(), m, n, v.data(), kv.data());
    double row_gap = 0.0;
    for (std::size_t i = 0; i < m; ++i) row_gap += std::abs(u[i] * kv[i] - cost.a[i]);
    double col_gap = 0.0;
    for (std::size_t j = 0; j < n; ++j) col_gap += std::abs(v[j] * ktu[j] - cost.b[j]);
    out.row_residual = row_gap;
    out.col_residual = col_gap;

    if (cfg.record_dual) {
      double dual = 0.0;
      for (std::size_t i = 0; i < m; ++i) dual += cost.a[i] * std::log(u[i]);
      for (std::size_t j = 0; j < n; ++j) dual += cost.b[j] * std::log(v[j]);
      double mass = 0.0;
      for (std::size_t i = 0; i < m; ++i) mass += u[i] * kv[i];
      out.dual_history.push_back(cfg.epsilon * (dual - mass));
    }
    if (row_gap <= cfg.marginal_tolerance && col_gap <= cfg.marginal_tolerance) {
      out.converged = true;
      break;
    }
  }

  out.plan = Matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.plan(i, j) = u[i] * kernel(i, j) * v[j];
  }
  out.log_u.resize(m);
  out.log_v.resize(n);
  for (std::size_t i = 0; i < m; ++i) out.log_u[i] = std::log(u[i]);
  for (std::size_t j = 0; j < n; ++j) out.log_v[j] = std::log(v[j]);
  out.u = std::move(u);
  out.v = std::move(v);
  return out;
}

// Potentials f = eps log u, g = eps log v.
TransportPlan solve_log_domain(const CostMatrix& cost, const SinkhornConfig& cfg) {
  const std::size_t m = cost.rows();
  const std::size_t n = cost.cols();
  const double eps = cfg.epsilon;
  const Matrix& c = cost.values;

  TransportPlan out;
  out.epsilon = eps;
  out.log_domain = true;
  out.a = cost.a;
  out.b = cost.b;

  Vector f(m, 0.0), g(n, 0.0), scratch(std::max(m, n));
  Vector log_a(m), log_b(n);
  for (std::size_t i = 0; i < m; ++i) log_a[i] = std::log(cost.a[i]);
  for (std::size_t j = 0; j < n; ++j) log_b[j] = std::log(cost.b[j]);

  auto row_lse = [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) scratch[j] = (g[j] - c(i, j)) / eps;
    return log_sum_exp(scratch.data(), n);
  };
  auto col_lse = [&](std::size_t j) {
    for (std::size_t i = 0; i < m; ++i) scratch[i] = (f[i] - c(i, j)) / eps;
    return log_sum_exp(scratch.data(), m);
  };

  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    for (std::size_t i = 0; i < m; ++i) f[i] = eps * (log_a[i] - row_lse(i));
    for (std::size_t j = 0; j < n; ++j) g[j] = eps * (log_b[j] - col_lse(j));
    double row_gap = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      row_gap += std::abs(std::exp(f[i] / eps + row_lse(i)) - cost.a[i]);
    }
    double col_gap = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      col_gap += std::abs(std::exp(g[j] / eps + col_lse(j)) - cost.b[j]);
    }
    out.iterations = it + 1;
    out.row_residual = row_gap;
    out.col_residual = col_gap;

    if (cfg.record_dual) {
      double dual = 0.0;
      for (std::size_t i = 0; i < m; ++i) dual += cost.a[i] * f[i];
      for (std::size_t j = 0; j < n; ++j) dual += cost.b[j] * g[j];
      double mass = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) mass += std::exp((f[i] + g[j] - c(i, j)) / eps);
      }
      out.dual_history.push_back(dual - eps * mass);
    }
    if (row_gap <= cfg.marginal_tolerance && col_gap <= cfg.marginal_tolerance) {
      out.converged = true;
      break;
    }
  }

  out.plan = Matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.plan(i, j) = std::exp((f[i] + g[j] - c(i, j)) / eps);
  }
  out.log_u.resize(m);
  out.log_v.resize(n);
  out.u.resize(m);
  out.v.resize(n);
  for (std::size_t i = 0; i < m; ++i) {
    out.log_u[i] = f[i] / eps;
    out.u[i] = std::exp(out.log_u[i]);
  }
  for (std::size_t j = 0; j < n; ++j) {
    out.log_v[j] = g[j] / eps;
    out.v[j] = std::exp(out.log_v[j]);
  }
  return out;
}

}  // namespace

void CostMatrix::validate() const {
  if (values.rows() == 0 || values.cols() == 0) throw ShapeError("empty cost matrix");
  if (a.size() != values.rows() || b.size() != values.cols()) {
    throw ShapeError("marginal lengths do not match the cost matrix");
  }
  for (double c : values.values()) {
    if (!std::isfinite(c) || c < 0.0) throw InvalidCost("cost entries must be finite and >= 0");
  }
  check_simplex(a, "a");
  check_simplex(b, "b");
}

TransportPlan sinkhorn(const CostMatrix& cost, const SinkhornConfig& cfg) {
  cost.validate();
  if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon)) {
    throw InvalidParams("Sinkhorn epsilon must be positive and finite");
  }
  if (!(cfg.marginal_tolerance > 0.0)) throw InvalidParams("marginal tolerance must be positive");

  bool use_log = cfg.epsilon < kLogDomainEpsilon;
  Matrix kernel;
  if (!use_log) {
    kernel = Matrix(cost.rows(), cost.cols());
    for (std::size_t i = 0; i < kernel.size(); ++i) {
      const double kv = std::exp(-cost.values.data()[i] / cfg.epsilon);
      if (kv < kKernelFloor) {
        use_log = true;
        break;
      }
      kernel.data()[i] = kv;
    }
  }

  TransportPlan out = use_log ? solve_log_domain(cost, cfg) : solve_scaling(cost, kernel, cfg);
  finish(out, cost);
  for (double p : out.plan.values()) {
    if (!std::isfinite(p)) throw NumericalFailure("non-finite transport plan entry");
  }
  return out;
}

double transport_cost(const Matrix& plan, const Matrix& cost) {
  if (plan.rows() != cost.rows() || plan.cols() != cost.cols()) {
    throw ShapeError("plan and cost shapes differ");
  }
  return kernels::dot(plan.values(), cost.values());
}

double transport_cost(const TransportPlan& plan, const CostMatrix& cost) {
  return transport_cost(plan.plan, cost.values);
}

double entropic_objective(const TransportPlan& plan, const CostMatrix& cost) {
  double reg = 0.0;
  for (double p : plan.plan.values()) reg += xlogx(p) - p;
  return transport_cost(plan.plan, cost.values) + plan.epsilon * reg;
}

Vector row_masses(const Matrix& plan) {
  Vector rho(plan.rows(), 0.0);
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    for (double p : plan.row(i)) rho[i] += p;
  }
  return rho;
}

Vector row_masses(const TransportPlan& plan) { return row_masses(plan.plan); }

Vector col_masses(const Matrix& plan) {
  Vector kappa(plan.cols(), 0.0);
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    for (std::size_t j = 0; j < plan.cols(); ++j) kappa[j] += plan(i, j);
  }
  return kappa;
}

double plan_entropy(const Matrix& plan) {
  double h = 0.0;
  for (double p : plan.values()) h -= xlogx(p);
  return h;
}

ConditionalEntropies conditional_entropies(const Matrix& plan) {
  const Vector rho = row_masses(plan);
  const Vector kappa = col_masses(plan);
  ConditionalEntropies h;
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    for (std::size_t j = 0; j < plan.cols(); ++j) {
      const double p = plan(i, j);
      if (p <= 0.0) continue;
      h.row -= p * std::log(p / rho[i]);
      h.col -= p * std::log(p / kappa[j]);
    }
  }
  // Conditionals of point masses can come out as -0 or tiny negatives.
  h.row = std::max(h.row, 0.0);
  h.col = std::max(h.col, 0.0);
  return h;
}

ConditionalEntropies conditional_entropies(const TransportPlan& plan) {
  return conditional_entropies(plan.plan);
}

Matrix cost_gradient(const TransportPlan& plan) {
  if (!plan.converged) {
    log().debug("cost_gradient on an unconverged plan (residual {:.3e} after {} iterations)",
               plan.marginal_residual, plan.iterations);
  }
  return plan.plan;
}

Matrix plan_vjp(const TransportPlan& plan, const Matrix& upstream) {
  const Matrix& p = plan.plan;
  const std::size_t m = p.rows();
  const std::size_t n = p.cols();
  if (upstream.rows() != m || upstream.cols() != n) throw ShapeError("upstream gradient shape");
  if (!(plan.epsilon > 0.0)) throw InvalidParams("plan has no entropic regularizer");

  // Adjoint system for (alpha, beta):
  //   rho_i alpha_i + sum_j P_ij beta_j = sum_j P_ij G_ij
  //   sum_i P_ij alpha_i + kappa_j beta_j = sum_i P_ij G_ij
  // with beta_{n-1} = 0 pinning the constant shift.
  const Vector rho = row_masses(p);
  const Vector kappa = col_masses(p);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd pm(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double pg = p(i, j) * upstream(i, j);
      r[static_cast<Eigen::Index>(i)] += pg;
      s[static_cast<Eigen::Index>(j)] += pg;
      pm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p(i, j);
    }
  }
  Eigen::VectorXd inv_rho(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    if (!(rho[i] > 0.0)) throw NumericalFailure("plan row with zero mass");
    inv_rho[static_cast<Eigen::Index>(i)] = 1.0 / rho[i];
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (n > 1) {
    const Eigen::Index k = static_cast<Eigen::Index>(n) - 1;
    Eigen::MatrixXd schur = -pm.transpose() * inv_rho.asDiagonal() * pm;
    for (std::size_t j = 0; j < n; ++j) {
      schur(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += kappa[j];
    }
    const Eigen::VectorXd rhs = s - pm.transpose() * inv_rho.cwiseProduct(r);
    beta.head(k) = schur.topLeftCorner(k, k).ldlt().solve(rhs.head(k));
  }
  const Eigen::VectorXd alpha = inv_rho.cwiseProduct(r - pm * beta);

  Matrix grad(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double centered = upstream(i, j) - alpha[static_cast<Eigen::Index>(i)] -
                              beta[static_cast<Eigen::Index>(j)];
      grad(i, j) = -p(i, j) * centered / plan.epsilon;
    }
  }
  return grad;
}

}  // namespace otcloak
