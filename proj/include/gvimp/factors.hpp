#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gvimp/core.hpp"
#include "gvimp/environment.hpp"
#include "gvimp/gp_prior.hpp"
#include "gvimp/quadrature.hpp"
#include "gvimp/sparse_gaussian.hpp"

namespace gvimp {

enum class FactorKind { boundary_start, boundary_end, gp_motion, collision, linear };

inline const char* to_string(FactorKind k) {
  switch (k) {
    case FactorKind::boundary_start: return "boundary_start";
    case FactorKind::boundary_end: return "boundary_end";
    case FactorKind::gp_motion: return "gp_motion";
    case FactorKind::collision: return "collision";
    case FactorKind::linear: return "linear";
  }
  return "?";
}

/// Everything a collision factor needs to evaluate h(x) for one support state.
struct CollisionModel {
  std::shared_ptr<const SdfGrid> sdf;
  RobotModel robot;
  CollisionSpec spec;
};

/// One term psi_k of the negative log posterior, attached to `span` consecutive
/// support states starting at `first` (the selection map M_k).
///
/// Every kind except `collision` is linear-Gaussian:
///   psi_k(x_k) = 1/2 || A x_k - b ||^2_W,
/// boundary factors with A = I, b = mu, W = K^{-1}; motion factors with
/// A = [Phi, -I], b = Phi mu_i - mu_{i+1}, W = Q^{-1}; `linear` is a free-form
/// measurement used for linear-Gaussian problems.
struct Factor {
  FactorKind kind = FactorKind::linear;
  Index first = 0;
  Index span = 1;
  Matrix a;
  Vector b;
  Matrix w;
  std::shared_ptr<const CollisionModel> collision;

  bool is_quadratic() const { return kind != FactorKind::collision; }

  static Factor boundary(FactorKind kind, Index state, const Vector& mean, const Matrix& precision) {
    Factor f;
    f.kind = kind;
    f.first = state;
    f.span = 1;
    f.a = Matrix::Identity(mean.size(), mean.size());
    f.b = mean;
    f.w = precision;
    return f;
  }

  static Factor gp_motion(Index state, const Matrix& phi, const Matrix& q_inv, const Vector& mu_i,
                          const Vector& mu_next) {
    const Index d = phi.rows();
    Factor f;
    f.kind = FactorKind::gp_motion;
    f.first = state;
    f.span = 2;
    f.a.resize(d, 2 * d);
    f.a << phi, -Matrix::Identity(d, d);
    f.b = phi * mu_i - mu_next;
    f.w = q_inv;
    return f;
  }

  static Factor linear(Index first, Index span, const Matrix& a, const Vector& b, const Matrix& w) {
    if (a.rows() != b.size() || w.rows() != b.size() || w.cols() != b.size()) {
      throw ShapeError("Factor::linear: A, b, W sizes disagree");
    }
    Factor f;
    f.kind = FactorKind::linear;
    f.first = first;
    f.span = span;
    f.a = a;
    f.b = b;
    f.w = w;
    return f;
  }

  static Factor collision_at(Index state, std::shared_ptr<const CollisionModel> model) {
    Factor f;
    f.kind = FactorKind::collision;
    f.first = state;
    f.span = 1;
    f.collision = std::move(model);
    return f;
  }
};

/// Ordered factors over `num_states` support states of size `state_dim`.
struct FactorGraph {
  Index num_states = 0;
  Index state_dim = 0;
  std::vector<Factor> factors;

  Index dim() const { return num_states * state_dim; }

  /// Span/range/coverage checks shared by every graph.
  void validate() const {
    if (num_states < 1 || state_dim < 1) throw DomainError("FactorGraph: empty graph");
    std::vector<bool> covered(static_cast<std::size_t>(num_states), false);
    for (std::size_t k = 0; k < factors.size(); ++k) {
      const Factor& f = factors[k];
      if (f.span < 1 || f.span > 2) {
        throw StructuralError("factor " + std::to_string(k) + " spans " + std::to_string(f.span) +
                              " states; only one or two adjacent states are supported");
      }
      if (f.first < 0 || f.first + f.span > num_states) {
        throw StructuralError("factor " + std::to_string(k) + " selects states outside the trajectory");
      }
      if (f.is_quadratic() && f.a.cols() != f.span * state_dim) {
        throw ShapeError("factor " + std::to_string(k) + " has a matrix of the wrong width");
      }
      if (!f.is_quadratic() && !f.collision) throw DomainError("collision factor without a model");
      for (Index s = f.first; s < f.first + f.span; ++s) covered[static_cast<std::size_t>(s)] = true;
    }
    for (Index s = 0; s < num_states; ++s) {
      if (!covered[static_cast<std::size_t>(s)]) {
        throw StructuralError("support state " + std::to_string(s) + " is not touched by any factor");
      }
    }
  }
};

/// Prior factors (start, N motion factors, goal) followed by N+1 collision factors.
/// `collision` may be null for a prior-only graph.
inline FactorGraph build_planning_graph(const PriorSpec& prior, std::shared_ptr<const CollisionModel> collision) {
  prior.validate();
  const Index n = prior.num_states();
  const Index d = prior.state_dim();
  FactorGraph g{n, d, {}};
  auto mu = [&](Index i) { return Vector(prior.mean.segment(i * d, d)); };
  g.factors.push_back(Factor::boundary(FactorKind::boundary_start, 0, mu(0), prior.k0_inv));
  for (Index i = 0; i + 1 < n; ++i) {
    const double t0 = prior.grid.at(i);
    const double t1 = prior.grid.at(i + 1);
    g.factors.push_back(Factor::gp_motion(i, transition_matrix(prior.model, t0, t1),
                                          grammian_inverse(prior.model, t0, t1, i), mu(i), mu(i + 1)));
  }
  g.factors.push_back(Factor::boundary(FactorKind::boundary_end, n - 1, mu(n - 1), prior.kN_inv));
  if (collision) {
    if (collision->robot.dof() != prior.model.dof) throw ShapeError("robot dof does not match the prior model");
    collision->robot.validate();
    collision->spec.validate();
    for (Index i = 0; i < n; ++i) g.factors.push_back(Factor::collision_at(i, collision));
  }
  g.validate();
  return g;
}

/// x_k = M_k x.
inline Vector select(const Factor& f, const Vector& joint, Index state_dim) {
  return joint.segment(f.first * state_dim, f.span * state_dim);
}

/// psi_k(x_k) / T.
inline double psi(const Factor& f, const Vector& xk, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("psi: temperature must be positive");
  if (f.is_quadratic()) {
    if (xk.size() != f.a.cols()) throw ShapeError("psi: factor-local vector has wrong size");
    const Vector r = f.a * xk - f.b;
    return 0.5 * r.dot(f.w * r) / temperature;
  }
  const auto& c = *f.collision;
  if (xk.size() != 2 * c.robot.dof()) throw ShapeError("psi: collision state has wrong size");
  const Vector h = collision_hinge(*c.sdf, c.robot, c.spec, xk);
  return h.squaredNorm() / (2.0 * c.spec.sigma_obs * temperature);
}

/// Factor-local Gaussian q_k = N(mean, cov).
struct Marginal {
  Vector mean;
  Matrix cov;
};

/// mu_k = M_k mu, Sigma_k = M_k Sigma M_k^T taken from the banded partial covariance.
inline Marginal marginal(const Vector& joint_mean, const PartialCovariance& cov, const Factor& f) {
  const Index d = cov.blocks.block_dim();
  if (joint_mean.size() != cov.blocks.dim()) throw ShapeError("marginal: mean/covariance size mismatch");
  if (f.span > 2) throw StructuralError("marginal: factor spans non-adjacent states");
  if (f.first < 0 || f.first + f.span > cov.num_blocks()) throw StructuralError("marginal: factor outside trajectory");
  Marginal m;
  m.mean = joint_mean.segment(f.first * d, f.span * d);
  if (f.span == 1) {
    m.cov = cov.diag(f.first);
  } else {
    m.cov.resize(2 * d, 2 * d);
    m.cov.topLeftCorner(d, d) = cov.diag(f.first);
    m.cov.bottomRightCorner(d, d) = cov.diag(f.first + 1);
    m.cov.bottomLeftCorner(d, d) = cov.cross(f.first);
    m.cov.topRightCorner(d, d) = cov.cross(f.first).transpose();
  }
  return m;
}

/// dV_k/dmu_k, d^2V_k/dmu_k dmu_k^T and V_k = E_{q_k}[psi_k] for one factor.
struct FactorDerivatives {
  Vector gradient;
  Matrix hessian;
  double cost = 0.0;
};

namespace detail {

inline FactorDerivatives quadratic_derivatives(const Factor& f, const Marginal& q, double temperature) {
  const Vector r = f.a * q.mean - f.b;
  const Matrix wa = f.w * f.a;
  FactorDerivatives out;
  out.gradient = wa.transpose() * r / temperature;
  out.hessian = f.a.transpose() * wa / temperature;
  out.cost = 0.5 * (r.dot(f.w * r) + (f.a.transpose() * wa * q.cov).trace()) / temperature;
  return out;
}

/// E[psi], E[z psi], E[z z^T psi] with x_pos = mu_pos + L z, z ~ N(0, I), where L is the
/// Cholesky factor of the position block. Collision costs ignore velocities, and the
/// leading block of the full Cholesky factor is L, so integrating over the velocity
/// coordinates as well would only multiply the work.
struct SteinMoments {
  double e0 = 0.0;
  Vector e1;
  Matrix e2;
  Matrix sqrt_cov;
};

inline SteinMoments collision_moments(const Factor& f, const Marginal& q, double temperature,
                                      const HermiteRule& rule, bool with_derivatives) {
  const Index dof = f.collision->robot.dof();
  if (q.mean.size() != 2 * dof || q.cov.rows() != 2 * dof || q.cov.cols() != 2 * dof) {
    throw ShapeError("collision factor: marginal has wrong size");
  }
  SteinMoments m;
  m.sqrt_cov = sqrt_covariance(q.cov.topLeftCorner(dof, dof));
  if (with_derivatives) {
    m.e1 = Vector::Zero(dof);
    m.e2 = Matrix::Zero(dof, dof);
  }
  Vector x = q.mean;
  for_each_sigma_point(rule, dof, [&](const Vector& z, double w) {
    x.head(dof).noalias() = m.sqrt_cov * z;
    x.head(dof) += q.mean.head(dof);
    const double value = psi(f, x, temperature);
    if (value == 0.0) return;
    m.e0 += w * value;
    if (with_derivatives) {
      m.e1 += (w * value) * z;
      m.e2.noalias() += (w * value) * z * z.transpose();
    }
  });
  return m;
}

}  // namespace detail

/// Closed-form Gaussian moments for linear-Gaussian factors; Gauss-Hermite quadrature
/// of psi itself for collision factors (velocity rows and columns are zero):
///   g = Sigma^{-1} E[(x - mu) psi] = L^{-T} E[z psi]
///   H = Sigma^{-1} E[(x - mu)(x - mu)^T psi] Sigma^{-1} - Sigma^{-1} E[psi]
///     = L^{-T} (E[z z^T psi] - E[psi] I) L^{-1}
inline FactorDerivatives factor_derivatives(const Factor& f, const Marginal& q, double temperature,
                                            const HermiteRule& rule) {
  if (!(temperature > 0.0)) throw DomainError("factor_derivatives: temperature must be positive");
  if (f.is_quadratic()) return detail::quadratic_derivatives(f, q, temperature);
  const Index n = q.mean.size();
  const Index dof = n / 2;
  const auto m = detail::collision_moments(f, q, temperature, rule, true);
  const auto lower = m.sqrt_cov.triangularView<Eigen::Lower>();
  FactorDerivatives out;
  out.cost = m.e0;
  out.gradient = Vector::Zero(n);
  out.gradient.head(dof) = lower.transpose().solve(m.e1);
  const Matrix inner = m.e2 - m.e0 * Matrix::Identity(dof, dof);
  const Matrix left = lower.transpose().solve(inner);  // L^{-T} inner
  Matrix hp = lower.transpose().solve(Matrix(left.transpose())).transpose();
  out.hessian = Matrix::Zero(n, n);
  out.hessian.topLeftCorner(dof, dof) = 0.5 * (hp + hp.transpose());
  return out;
}

inline FactorDerivatives factor_derivatives(const Factor& f, const Marginal& q, double temperature, int degree) {
  return factor_derivatives(f, q, temperature, hermite_rule(degree));
}

/// V_k = E_{q_k}[psi_k]: psi(mu) + tr(P^{-1} Sigma)/2 (scaled by 1/T) for quadratic
/// factors, quadrature for collision factors.
inline double factor_cost(const Factor& f, const Marginal& q, double temperature, const HermiteRule& rule) {
  if (!(temperature > 0.0)) throw DomainError("factor_cost: temperature must be positive");
  if (f.is_quadratic()) return detail::quadratic_derivatives(f, q, temperature).cost;
  return detail::collision_moments(f, q, temperature, rule, false).e0;
}

inline double factor_cost(const Factor& f, const Marginal& q, double temperature, int degree) {
  return factor_cost(f, q, temperature, hermite_rule(degree));
}

}  // namespace gvimp
