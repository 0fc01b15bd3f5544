#pragma once

#include <cmath>
#include <vector>

#include "gvimp/block_tridiagonal.hpp"
#include "gvimp/core.hpp"
#include "gvimp/factors.hpp"
#include "gvimp/gvi_solver.hpp"
#include "gvimp/sparse_gaussian.hpp"

namespace gvimp {

/// Deterministic (GPMP2-style) objective
///   1/2 ||x - mu||^2_{K^{-1}} + 1/2 ||h(x)||^2_{Sigma_obs^{-1}},
/// evaluated factor by factor.
struct MapCost {
  double prior = 0.0;
  double collision = 0.0;
  double total() const { return prior + collision; }
};

inline MapCost map_cost_breakdown(const FactorGraph& graph, const Vector& x) {
  if (x.size() != graph.dim()) throw ShapeError("map_cost: trajectory has wrong size");
  MapCost c;
  for (const Factor& f : graph.factors) {
    const double v = psi(f, select(f, x, graph.state_dim), 1.0);
    (detail::is_prior_factor(f) ? c.prior : c.collision) += v;
  }
  return c;
}

inline double map_cost(const FactorGraph& graph, const Vector& x) { return map_cost_breakdown(graph, x).total(); }

struct MapResult {
  Vector x;
  std::vector<MapCost> history;  // cost per accepted iterate, row 0 = x0
  std::vector<int> exponents;    // accepted R per row (0 for row 0)
  SolverStatus status = SolverStatus::max_iterations;
  int iterations = 0;
};

namespace detail {

/// Gauss-Newton system (sum_k J_k^T W_k J_k, sum_k J_k^T W_k r_k) at x.
inline std::pair<BlockTridiagonalMatrix, Vector> gauss_newton_system(const FactorGraph& graph, const Vector& x) {
  const Index d = graph.state_dim;
  BlockTridiagonalMatrix lhs(graph.num_states, d);
  Vector rhs = Vector::Zero(graph.dim());
  for (const Factor& f : graph.factors) {
    const Vector xk = select(f, x, d);
    Matrix jac;
    Vector res;
    Matrix w;
    if (f.is_quadratic()) {
      jac = f.a;
      res = f.a * xk - f.b;
      w = f.w;
    } else {
      const auto& c = *f.collision;
      CollisionResult cr = collision_vector(*c.sdf, c.robot, c.spec, xk);
      jac = std::move(cr.jacobian);
      res = std::move(cr.h);
      w = Matrix::Identity(res.size(), res.size()) / c.spec.sigma_obs;
    }
    const Matrix jtw = jac.transpose() * w;
    const Matrix block = jtw * jac;
    rhs.segment(f.first * d, f.span * d) += jtw * res;
    for (Index r = 0; r < f.span; ++r) {
      for (Index c = 0; c <= r; ++c) lhs.add_block(f.first + r, f.first + c, block.block(r * d, c * d, d, d));
    }
  }
  lhs.symmetrize();
  return {std::move(lhs), std::move(rhs)};
}

}  // namespace detail

/// Gauss-Newton on the MAP objective:
///   (K^{-1} + J^T Sigma_obs^{-1} J) dx = -(K^{-1}(x - mu) + J^T Sigma_obs^{-1} h(x)),
/// damped by the same gamma^R backtracking as the GVI solver. The system keeps the
/// block-tridiagonal band and is solved with the block LDL^T.
/// Uses step_base, min_backtrack, max_backtrack, tolerance and max_iterations of `config`.
inline MapResult gauss_newton_solve(const FactorGraph& graph, const Vector& x0, const SolverConfig& config) {
  config.validate();
  graph.validate();
  if (x0.size() != graph.dim()) throw ShapeError("gauss_newton_solve: x0 has wrong size");
  MapResult res;
  res.x = x0;
  res.history.push_back(map_cost_breakdown(graph, x0));
  res.exponents.push_back(0);
  for (int it = 1; it <= config.max_iterations; ++it) {
    const double before = res.history.back().total();
    auto [lhs, rhs] = detail::gauss_newton_system(graph, res.x);
    const Vector dx = -solve(ldl_decompose(lhs), rhs);
    // Decrease predicted by the Gauss-Newton model: 1/2 rhs^T lhs^{-1} rhs.
    if (-0.5 * rhs.dot(dx) < config.tolerance * std::max(1.0, std::abs(before))) {
      res.status = SolverStatus::converged;
      break;
    }
    bool accepted = false;
    for (int r = config.min_backtrack; r <= config.max_backtrack; ++r) {
      const Vector candidate = res.x + std::pow(config.step_base, r) * dx;
      const MapCost cost = map_cost_breakdown(graph, candidate);
      if (std::isfinite(cost.total()) && cost.total() < before) {
        res.x = candidate;
        res.history.push_back(cost);
        res.exponents.push_back(r);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.status = SolverStatus::no_progress;
      break;
    }
    res.iterations = it;
    if (before - res.history.back().total() < config.tolerance * std::max(1.0, std::abs(before))) {
      res.status = SolverStatus::converged;
      break;
    }
  }
  return res;
}

/// Defaults for the MAP baseline: full Gauss-Newton step first (R starts at 0).
inline SolverConfig map_solver_config(SolverConfig base = {}) {
  base.min_backtrack = 0;
  base.temperature = 1.0;
  return base;
}

}  // namespace gvimp
