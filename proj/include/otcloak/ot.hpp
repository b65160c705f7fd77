#pragma once

#include <cstddef>
#include <vector>

#include "otcloak/matrix.hpp"

namespace otcloak {

/// Ground-cost matrix together with the two marginals it is solved against.
struct CostMatrix {
  Matrix values;  // m x n, finite and >= 0
  Vector a;       // length m, positive, sums to 1
  Vector b;       // length n, positive, sums to 1

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t cols() const noexcept { return values.cols(); }

  /// Throws ShapeError / InvalidCost when the invariants do not hold.
  void validate() const;
};

struct SinkhornConfig {
  double epsilon = 0.2;
  std::size_t max_iterations = 30;
  double marginal_tolerance = 1e-6;
  /// Record the dual objective after every iteration (diagnostics and tests).
  bool record_dual = false;
};

/// Entropic coupling P = diag(u) K diag(v), K = exp(-C / epsilon).
struct TransportPlan {
  Matrix plan;
  Vector u;      // exp(log_u); may overflow to inf when solved in the log domain
  Vector v;
  Vector log_u;
  Vector log_v;
  Vector a;      // marginals the plan was solved against
  Vector b;
  double epsilon = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool log_domain = false;
  double row_residual = 0.0;  // || P 1 - a ||_1
  double col_residual = 0.0;  // || P^T 1 - b ||_1
  double marginal_residual = 0.0;
  double transport_cost = 0.0;      // <P, C>
  double entropic_objective = 0.0;  // <P, C> + eps sum P (log P - 1)
  std::vector<double> dual_history;

  std::size_t rows() const noexcept { return plan.rows(); }
  std::size_t cols() const noexcept { return plan.cols(); }
};

/// Alternating scaling u <- a / (K v), v <- b / (K^T u) from v = 1.
///
/// Stops after `max_iterations` or once both L1 marginal residuals drop
/// below the tolerance. Switches to log-domain potentials when epsilon is
/// below 0.05 or any kernel entry underflows 1e-300.
TransportPlan sinkhorn(const CostMatrix& cost, const SinkhornConfig& cfg = {});

/// sum_ij P_ij C_ij. Throws ShapeError on mismatched shapes.
double transport_cost(const TransportPlan& plan, const CostMatrix& cost);
double transport_cost(const Matrix& plan, const Matrix& cost);

/// <P, C> + eps sum P (log P - 1), with 0 log 0 = 0.
double entropic_objective(const TransportPlan& plan, const CostMatrix& cost);

Vector row_masses(const TransportPlan& plan);
Vector row_masses(const Matrix& plan);
Vector col_masses(const Matrix& plan);

struct ConditionalEntropies {
  double row = 0.0;
  double col = 0.0;
};

/// Row- and column-conditional entropies, taken relative to the plan's own
/// row and column masses (which equal a and b once the plan has converged).
ConditionalEntropies conditional_entropies(const Matrix& plan);
ConditionalEntropies conditional_entropies(const TransportPlan& plan);

/// Shannon entropy -sum P log P.
double plan_entropy(const Matrix& plan);

/// Gradient of the transport cost with respect to C under the envelope
/// approximation: returns P. Logs a warning for unconverged plans.
Matrix cost_gradient(const TransportPlan& plan);

/// Vector-Jacobian product through the entropic optimum: given
/// G = dF/dP, returns dF/dC by implicit differentiation of the fixed point
/// log P_ij = (f_i + g_j - C_ij) / eps under the marginal constraints.
Matrix plan_vjp(const TransportPlan& plan, const Matrix& upstream);

}  // namespace otcloak
