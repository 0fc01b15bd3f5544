#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gvimp/block_tridiagonal.hpp"
#include "gvimp/core.hpp"
#include "gvimp/factors.hpp"
#include "gvimp/quadrature.hpp"
#include "gvimp/sparse_gaussian.hpp"

namespace gvimp {

/// q(x) = N(mean, precision^{-1}) over the joint trajectory.
struct GaussianTrajectory {
  Vector mean;
  BlockTridiagonalMatrix precision;

  static GaussianTrajectory isotropic(const Vector& mean, Index state_dim, double precision_scale) {
    if (state_dim < 1 || mean.size() % state_dim != 0) throw ShapeError("GaussianTrajectory: mean not divisible into states");
    return {mean, BlockTridiagonalMatrix::identity(mean.size() / state_dim, state_dim, precision_scale)};
  }
};

enum class InitMode { linear_interpolation, from_file };

struct SolverConfig {
  double temperature = 1.0;
  double step_base = 0.9;     // gamma
  int min_backtrack = 1;      // first exponent R tried each iteration
  int max_backtrack = 30;     // R_max
  double tolerance = 1e-5;    // eta, on the relative decrease of the total cost
  int max_iterations = 100;
  int quadrature_degree = 6;  // per dimension
  InitMode init = InitMode::linear_interpolation;
  double init_precision = 10.0;  // Sigma^{-1} <- init_precision * I

  void validate() const {
    if (!(temperature > 0.0)) throw DomainError("SolverConfig: temperature must be positive");
    if (!(step_base > 0.0 && step_base < 1.0)) throw DomainError("SolverConfig: step base must lie in (0, 1)");
    if (min_backtrack < 0 || max_backtrack < min_backtrack) throw DomainError("SolverConfig: bad backtracking range");
    if (!(tolerance >= 0.0)) throw DomainError("SolverConfig: tolerance must be non-negative");
    if (max_iterations < 0) throw DomainError("SolverConfig: max_iterations must be non-negative");
    if (quadrature_degree < 1 || quadrature_degree > kMaxHermiteDegree) throw DomainError("SolverConfig: quadrature degree out of range");
    if (!(init_precision > 0.0)) throw DomainError("SolverConfig: init precision must be positive");
  }
};

/// Objective V(q) = 1/2 log|Sigma^{-1}| + sum_k V_k split the way it is reported.
struct CostReport {
  double prior = 0.0;      // boundary and motion factors
  double collision = 0.0;  // collision (and free-form linear) factors
  double entropy = 0.0;    // 1/2 log|Sigma^{-1}|
  double total = 0.0;
  int exponent = 0;        // accepted backtracking exponent R (0 for the initial row)
};

enum class SolverStatus { converged, max_iterations, no_progress };

inline const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::converged: return "converged";
    case SolverStatus::max_iterations: return "max_iterations";
    case SolverStatus::no_progress: return "no_progress";
  }
  return "?";
}

namespace detail {

inline bool is_prior_factor(const Factor& f) {
  return f.kind == FactorKind::boundary_start || f.kind == FactorKind::boundary_end || f.kind == FactorKind::gp_motion;
}

inline void check_trajectory(const FactorGraph& graph, const GaussianTrajectory& traj) {
  if (traj.mean.size() != graph.dim() || traj.precision.num_blocks() != graph.num_states ||
      traj.precision.block_dim() != graph.state_dim) {
    throw ShapeError("trajectory does not match the factor graph");
  }
}

}  // namespace detail

/// Factorization, banded covariance and costs of one trajectory.
struct TrajectoryEvaluation {
  LdlFactorization ldl;
  PartialCovariance covariance;
  CostReport costs;
};

/// Throws NumericalError when the precision is not positive definite.
inline TrajectoryEvaluation evaluate(const FactorGraph& graph, const GaussianTrajectory& traj, double temperature,
                                     const HermiteRule& rule) {
  detail::check_trajectory(graph, traj);
  TrajectoryEvaluation e{ldl_decompose(traj.precision), {}, {}};
  e.covariance = partial_inverse(e.ldl);
  for (const Factor& f : graph.factors) {
    const double v = factor_cost(f, marginal(traj.mean, e.covariance, f), temperature, rule);
    (detail::is_prior_factor(f) ? e.costs.prior : e.costs.collision) += v;
  }
  e.costs.entropy = 0.5 * log_det(e.ldl);
  e.costs.total = e.costs.prior + e.costs.collision + e.costs.entropy;
  return e;
}

inline CostReport evaluate_costs(const FactorGraph& graph, const GaussianTrajectory& traj, const SolverConfig& config) {
  return evaluate(graph, traj, config.temperature, hermite_rule(config.quadrature_degree)).costs;
}

struct JointDerivatives {
  Vector gradient;                 // dV/dmu
  BlockTridiagonalMatrix hessian;  // d^2V/dmu dmu^T, banded
  TrajectoryEvaluation at;         // evaluation of the trajectory they were taken at
};

/// dV/dmu = sum_k M_k^T g_k, d^2V/dmu dmu^T = sum_k M_k^T H_k M_k, reduced in factor order.
inline JointDerivatives joint_derivatives(const FactorGraph& graph, const GaussianTrajectory& traj,
                                          double temperature, const HermiteRule& rule) {
  detail::check_trajectory(graph, traj);
  const Index d = graph.state_dim;
  JointDerivatives out{Vector::Zero(graph.dim()), BlockTridiagonalMatrix(graph.num_states, d),
                       {ldl_decompose(traj.precision), {}, {}}};
  out.at.covariance = partial_inverse(out.at.ldl);
  for (const Factor& f : graph.factors) {
    const FactorDerivatives fd = factor_derivatives(f, marginal(traj.mean, out.at.covariance, f), temperature, rule);
    out.gradient.segment(f.first * d, f.span * d) += fd.gradient;
    for (Index r = 0; r < f.span; ++r) {
      for (Index c = 0; c <= r; ++c) {
        out.hessian.add_block(f.first + r, f.first + c, fd.hessian.block(r * d, c * d, d, d));
      }
    }
    (detail::is_prior_factor(f) ? out.at.costs.prior : out.at.costs.collision) += fd.cost;
  }
  out.hessian.symmetrize();
  out.at.costs.entropy = 0.5 * log_det(out.at.ldl);
  out.at.costs.total = out.at.costs.prior + out.at.costs.collision + out.at.costs.entropy;
  return out;
}

inline JointDerivatives joint_derivatives(const FactorGraph& graph, const GaussianTrajectory& traj,
                                          const SolverConfig& config) {
  return joint_derivatives(graph, traj, config.temperature, hermite_rule(config.quadrature_degree));
}

/// Natural-gradient direction: Sigma^{-1} dmu = -g,  dSigma^{-1} = H - Sigma^{-1}.
struct NgdDirection {
  Vector mean;
  BlockTridiagonalMatrix precision;
};

inline NgdDirection ngd_step(const GaussianTrajectory& traj, const Vector& gradient,
                             const BlockTridiagonalMatrix& hessian, const LdlFactorization& precision_ldl) {
  if (gradient.size() != traj.mean.size()) throw ShapeError("ngd_step: gradient has wrong size");
  return {-solve(precision_ldl, gradient), hessian - traj.precision};
}

inline NgdDirection ngd_step(const GaussianTrajectory& traj, const Vector& gradient,
                             const BlockTridiagonalMatrix& hessian) {
  return ngd_step(traj, gradient, hessian, ldl_decompose(traj.precision));
}

namespace detail {

/// Direction at rounding level: the cost can no longer register a step along it.
inline bool negligible(const NgdDirection& dir, const GaussianTrajectory& traj) {
  constexpr double kRoundoff = 1e-12;
  return dir.mean.cwiseAbs().maxCoeff() <= kRoundoff * (1.0 + traj.mean.cwiseAbs().maxCoeff()) &&
         dir.precision.max_abs() <= kRoundoff * traj.precision.max_abs();
}

}  // namespace detail

/// traj + scale * direction.
inline GaussianTrajectory apply_step(const GaussianTrajectory& traj, const NgdDirection& dir, double scale) {
  return {traj.mean + scale * dir.mean, traj.precision.axpy(scale, dir.precision)};
}

struct BacktrackResult {
  GaussianTrajectory trajectory;
  int exponent = 0;
  CostReport costs;
  bool progressed = false;
};

/// Tries R = min_backtrack, ..., max_backtrack and keeps the first step gamma^R whose
/// precision is positive definite and whose total cost is strictly below `current_total`.
/// A candidate whose sigma points leave the SDF grid is rejected like a non-SPD one.
inline BacktrackResult backtrack(const FactorGraph& graph, const GaussianTrajectory& traj, const NgdDirection& dir,
                                 const SolverConfig& config, double current_total, const HermiteRule& rule) {
  for (int r = config.min_backtrack; r <= config.max_backtrack; ++r) {
    GaussianTrajectory candidate = apply_step(traj, dir, std::pow(config.step_base, r));
    candidate.precision.symmetrize();
    std::optional<TrajectoryEvaluation> e;
    try {
      e = evaluate(graph, candidate, config.temperature, rule);
    } catch (const NumericalError&) {
      continue;  // left the positive-definite cone
    } catch (const OutOfBoundsError&) {
      continue;  // sigma points left the map
    }
    if (std::isfinite(e->costs.total) && e->costs.total < current_total) {
      e->costs.exponent = r;
      return {std::move(candidate), r, e->costs, true};
    }
  }
  return {traj, 0, {}, false};
}

inline BacktrackResult backtrack(const FactorGraph& graph, const GaussianTrajectory& traj, const NgdDirection& dir,
                                 const SolverConfig& config) {
  const HermiteRule rule = hermite_rule(config.quadrature_degree);
  return backtrack(graph, traj, dir, config, evaluate(graph, traj, config.temperature, rule).costs.total, rule);
}

struct GviResult {
  GaussianTrajectory trajectory;
  std::vector<CostReport> history;  // row 0 is the initial trajectory
  SolverStatus status = SolverStatus::max_iterations;
  int iterations = 0;
};

/// Natural-gradient Gaussian VI: marginals -> factor derivatives -> joint assembly ->
/// NGD direction -> backtracking, until the relative decrease of V drops below eta.
/// `on_step(trajectory, costs)` sees every accepted iterate.
template <class OnStep>
GviResult optimize(const FactorGraph& graph, const GaussianTrajectory& init, const SolverConfig& config,
                   OnStep&& on_step) {
  config.validate();
  graph.validate();
  const HermiteRule rule = hermite_rule(config.quadrature_degree);
  GviResult res{init, {}, SolverStatus::max_iterations, 0};
  res.history.push_back(evaluate(graph, init, config.temperature, rule).costs);

  for (int it = 1; it <= config.max_iterations; ++it) {
    const double before = res.history.back().total;
    JointDerivatives jd = joint_derivatives(graph, res.trajectory, config.temperature, rule);
    const NgdDirection dir = ngd_step(res.trajectory, jd.gradient, jd.hessian, jd.at.ldl);
    if (detail::negligible(dir, res.trajectory)) {
      res.status = SolverStatus::converged;
      break;
    }
    BacktrackResult bt = backtrack(graph, res.trajectory, dir, config, before, rule);
    if (!bt.progressed) {
      res.status = SolverStatus::no_progress;
      break;
    }
    res.trajectory = std::move(bt.trajectory);
    res.history.push_back(bt.costs);
    res.iterations = it;
    on_step(std::as_const(res.trajectory), std::as_const(res.history.back()));
    if (before - bt.costs.total < config.tolerance * std::max(1.0, std::abs(before))) {
      res.status = SolverStatus::converged;
      break;
    }
  }
  return res;
}

inline GviResult optimize(const FactorGraph& graph, const GaussianTrajectory& init, const SolverConfig& config) {
  return optimize(graph, init, config, [](const GaussianTrajectory&, const CostReport&) {});
}

struct TwoPhaseResult {
  GviResult low;
  GviResult high;
};

/// Plans at low temperature, then replans at high temperature from the low-T mean.
/// The precision restarts at `high.init_precision * I` unless `keep_precision`.
inline TwoPhaseResult two_phase_replan(const FactorGraph& graph, const GaussianTrajectory& init,
                                       const SolverConfig& low, const SolverConfig& high, bool keep_precision = false) {
  TwoPhaseResult out;
  out.low = optimize(graph, init, low);
  GaussianTrajectory restart = keep_precision
                                   ? out.low.trajectory
                                   : GaussianTrajectory::isotropic(out.low.trajectory.mean, graph.state_dim, high.init_precision);
  out.high = optimize(graph, restart, high);
  return out;
}

}  // namespace gvimp
