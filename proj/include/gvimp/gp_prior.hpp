#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "gvimp/block_tridiagonal.hpp"
#include "gvimp/core.hpp"

namespace gvimp {

/// Constant-velocity linear model x' = A x + F w with x = [position; velocity],
/// A = [[0, I], [0, 0]], F = [0; I] and white noise of covariance `qc`.
struct LtiModel {
  Index dof = 2;
  Matrix qc = Matrix::Identity(2, 2);

  Index state_dim() const { return 2 * dof; }

  static LtiModel constant_velocity(Index dof, double qc_scale) {
    return {dof, qc_scale * Matrix::Identity(dof, dof)};
  }

  void validate() const {
    if (dof < 1) throw DomainError("LtiModel: dof must be positive");
    if (qc.rows() != dof || qc.cols() != dof) throw ShapeError("LtiModel: qc must be dof x dof");
    if (!qc.isApprox(qc.transpose(), 1e-12)) throw DomainError("LtiModel: qc is not symmetric");
    if (Eigen::LLT<Matrix>(qc).info() != Eigen::Success) {
      throw DomainError("LtiModel: qc is not positive definite");
    }
  }
};

/// Support-state times t_0 < t_1 < ... < t_N.
struct TimeGrid {
  std::vector<double> times;

  static TimeGrid uniform(Index intervals, double horizon) {
    if (intervals < 1) throw DomainError("TimeGrid: need at least one interval");
    if (!(horizon > 0.0)) throw DomainError("TimeGrid: horizon must be positive");
    TimeGrid g;
    g.times.resize(static_cast<std::size_t>(intervals) + 1);
    for (Index i = 0; i <= intervals; ++i) {
      g.times[static_cast<std::size_t>(i)] = horizon * static_cast<double>(i) / static_cast<double>(intervals);
    }
    return g;
  }

  Index num_states() const { return static_cast<Index>(times.size()); }
  Index num_intervals() const { return num_states() - 1; }
  double at(Index i) const { return times.at(static_cast<std::size_t>(i)); }

  void validate() const {
    if (times.size() < 2) throw DomainError("TimeGrid: need at least two times");
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (!(times[i] > times[i - 1])) {
        throw DomainError("TimeGrid: times must be strictly increasing (index " + std::to_string(i) + ")");
      }
    }
  }
};

/// Everything that defines the discretized GP prior N(mean, K).
struct PriorSpec {
  Vector mean;    // (N+1) * state_dim
  Matrix k0_inv;  // start-state precision
  Matrix kN_inv;  // goal-state precision
  LtiModel model;
  TimeGrid grid;

  Index state_dim() const { return model.state_dim(); }
  Index num_states() const { return grid.num_states(); }

  void validate() const {
    model.validate();
    grid.validate();
    const Index d = state_dim();
    if (mean.size() != num_states() * d) throw ShapeError("PriorSpec: mean has wrong length");
    for (const Matrix* k : {&k0_inv, &kN_inv}) {
      if (k->rows() != d || k->cols() != d) throw ShapeError("PriorSpec: boundary precision must be state_dim square");
      if (!k->isApprox(k->transpose(), 1e-12) || Eigen::LLT<Matrix>(*k).info() != Eigen::Success) {
        throw DomainError("PriorSpec: boundary precision must be symmetric positive definite");
      }
    }
  }
};

/// Phi(t, s) of the constant-velocity model: [[I, (t-s) I], [0, I]].
inline Matrix transition_matrix(const LtiModel& model, double s, double t) {
  if (t < s) throw DomainError("transition_matrix: t must not precede s");
  const Index n = model.dof;
  Matrix phi = Matrix::Identity(2 * n, 2 * n);
  phi.topRightCorner(n, n) = (t - s) * Matrix::Identity(n, n);
  return phi;
}

/// Process-noise Grammian Q_{i,i+1} accumulated over [t_i, t_next].
inline Matrix grammian(const LtiModel& model, double t_i, double t_next) {
  const double dt = t_next - t_i;
  if (!(dt > 0.0)) throw DomainError("grammian: interval length must be positive");
  const Index n = model.dof;
  Matrix q(2 * n, 2 * n);
  q.topLeftCorner(n, n) = dt * dt * dt / 3.0 * model.qc;
  q.topRightCorner(n, n) = dt * dt / 2.0 * model.qc;
  q.bottomLeftCorner(n, n) = dt * dt / 2.0 * model.qc;
  q.bottomRightCorner(n, n) = dt * model.qc;
  return q;
}

/// Q_{i,i+1}^{-1}; `interval` only labels the error.
inline Matrix grammian_inverse(const LtiModel& model, double t_i, double t_next, Index interval = -1) {
  const Matrix q = grammian(model, t_i, t_next);
  Eigen::LLT<Matrix> llt(q);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("grammian for interval " + std::to_string(interval) + " is singular", interval);
  }
  Matrix inv = llt.solve(Matrix::Identity(q.rows(), q.cols()));
  return 0.5 * (inv + inv.transpose());
}

/// K^{-1} = B^T Q^{-1} B assembled block by block.
inline BlockTridiagonalMatrix build_prior_precision(const PriorSpec& spec) {
  spec.validate();
  const Index n = spec.num_states();
  BlockTridiagonalMatrix k_inv(n, spec.state_dim());
  k_inv.diag(0) += spec.k0_inv;
  for (Index i = 0; i + 1 < n; ++i) {
    const Matrix phi = transition_matrix(spec.model, spec.grid.at(i), spec.grid.at(i + 1));
    const Matrix w = grammian_inverse(spec.model, spec.grid.at(i), spec.grid.at(i + 1), i);
    k_inv.diag(i) += phi.transpose() * w * phi;
    k_inv.diag(i + 1) += w;
    k_inv.lower(i) -= w * phi;
  }
  k_inv.diag(n - 1) += spec.kN_inv;
  return k_inv;
}

/// Linear interpolation of full states between `start` and `goal` over the grid.
inline Vector interpolate_states(const Vector& start, const Vector& goal, const TimeGrid& grid) {
  if (start.size() != goal.size()) throw ShapeError("interpolate_states: start/goal size mismatch");
  const Index d = start.size();
  const double t0 = grid.times.front();
  const double span = grid.times.back() - t0;
  Vector out(grid.num_states() * d);
  for (Index i = 0; i < grid.num_states(); ++i) {
    const double a = (grid.at(i) - t0) / span;
    out.segment(i * d, d) = (1.0 - a) * start + a * goal;
  }
  return out;
}

}  // namespace gvimp
