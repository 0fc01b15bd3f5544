#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "gvimp/core.hpp"

namespace gvimp {

/// Gauss-Hermite rule for expectations under the standard normal:
///   E[f(z)] ~= sum_i weights[i] * f(roots[i]),  exact for polynomials of degree <= 2p-1.
struct HermiteRule {
  int degree = 0;
  std::vector<double> roots;    // strictly increasing, symmetric about 0
  std::vector<double> weights;  // positive, sum to 1
};

inline constexpr int kMaxHermiteDegree = 20;
inline constexpr double kMaxSigmaPoints = 1e7;

namespace detail {

/// Orthonormal probabilists' Hermite polynomials phi_0..phi_{n-1} at x.
inline std::vector<double> orthonormal_hermite(double x, int n) {
  std::vector<double> phi(static_cast<std::size_t>(n));
  phi[0] = 1.0;
  if (n > 1) phi[1] = x;
  for (int k = 1; k + 1 < n; ++k) {
    phi[k + 1] = (x * phi[k] - std::sqrt(static_cast<double>(k)) * phi[k - 1]) / std::sqrt(static_cast<double>(k + 1));
  }
  return phi;
}

}  // namespace detail

/// Roots from the eigenvalues of the Hermite Jacobi matrix; weights from the moment
/// system sum_i W_i phi_k(root_i) = delta_k0, k < p, written in the orthonormal
/// Hermite basis (the monomial Vandermonde form is hopeless beyond p ~ 12).
inline HermiteRule hermite_rule(int p) {
  if (p < 1 || p > kMaxHermiteDegree) {
    throw DomainError("hermite_rule: degree " + std::to_string(p) + " outside [1, " +
                      std::to_string(kMaxHermiteDegree) + "]");
  }
  Matrix jacobi = Matrix::Zero(p, p);
  for (int k = 1; k < p; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi, Eigen::EigenvaluesOnly);
  std::vector<double> roots(eig.eigenvalues().data(), eig.eigenvalues().data() + p);
  std::sort(roots.begin(), roots.end());
  for (int i = 0; i < p / 2; ++i) {
    const double r = 0.5 * (roots[p - 1 - i] - roots[i]);
    roots[i] = -r;
    roots[p - 1 - i] = r;
  }
  if (p % 2 == 1) roots[p / 2] = 0.0;

  Matrix system(p, p);
  for (int i = 0; i < p; ++i) {
    const auto phi = detail::orthonormal_hermite(roots[i], p);
    for (int k = 0; k < p; ++k) system(k, i) = phi[k];
  }
  Vector rhs = Vector::Zero(p);
  rhs(0) = 1.0;
  const Vector w = system.fullPivLu().solve(rhs);

  HermiteRule rule;
  rule.degree = p;
  rule.roots = std::move(roots);
  rule.weights.resize(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) rule.weights[i] = 0.5 * (w(i) + w(p - 1 - i));
  double total = 0.0;
  for (double v : rule.weights) total += v;
  for (double& v : rule.weights) v /= total;
  return rule;
}

/// Number of tensor-product sigma points, guarded against the p^n blowup.
inline long long sigma_point_count(const HermiteRule& rule, Index dim) {
  const double count = std::pow(static_cast<double>(rule.degree), static_cast<double>(dim));
  if (count > kMaxSigmaPoints) {
    throw ResourceError("quadrature: " + std::to_string(rule.degree) + "^" + std::to_string(dim) +
                        " sigma points exceed the budget of 1e7");
  }
  return static_cast<long long>(count);
}

/// Calls visit(z, weight) for every point of the n-dimensional tensor-product rule in
/// standard-normal coordinates. Visiting order is fixed (last coordinate fastest).
template <class Visitor>
void for_each_sigma_point(const HermiteRule& rule, Index dim, Visitor&& visit) {
  sigma_point_count(rule, dim);
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  Vector z(dim);
  const int p = rule.degree;
  while (true) {
    double w = 1.0;
    for (Index d = 0; d < dim; ++d) {
      z(d) = rule.roots[idx[d]];
      w *= rule.weights[idx[d]];
    }
    visit(std::as_const(z), w);
    Index d = dim - 1;
    while (d >= 0 && ++idx[d] == p) {
      idx[d] = 0;
      --d;
    }
    if (d < 0) break;
  }
}

/// Lower Cholesky factor of an SPD matrix, or NumericalError.
inline Matrix sqrt_covariance(const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("quadrature: covariance is not positive definite");
  return llt.matrixL();
}

namespace detail {

template <class T, class = void>
struct PlainValue {
  using type = T;
};

template <class T>
struct PlainValue<T, std::enable_if_t<!std::is_arithmetic_v<T>>> {
  using type = typename T::PlainObject;
};

}  // namespace detail

/// Integral of g(x) N(x; m, P) dx by the tensor-product rule at x = sqrt(P) xi + m.
/// g may return a scalar or any Eigen expression type.
template <class Fn>
auto gh_expectation(Fn&& g, const Vector& m, const Matrix& cov, const HermiteRule& rule) {
  if (cov.rows() != m.size() || cov.cols() != m.size()) throw ShapeError("gh_expectation: covariance/mean size mismatch");
  using Result = std::decay_t<decltype(g(std::declval<const Vector&>()))>;
  using Value = typename detail::PlainValue<Result>::type;
  const Matrix sqrt_p = sqrt_covariance(cov);
  Value acc{};
  bool first = true;
  Vector x(m.size());
  for_each_sigma_point(rule, m.size(), [&](const Vector& z, double w) {
    x.noalias() = sqrt_p * z;
    x += m;
    if (first) {
      acc = w * g(std::as_const(x));
      first = false;
    } else {
      acc += w * g(std::as_const(x));
    }
  });
  return acc;
}

template <class Fn>
auto gh_expectation(Fn&& g, const Vector& m, const Matrix& cov, int degree) {
  return gh_expectation(std::forward<Fn>(g), m, cov, hermite_rule(degree));
}

}  // namespace gvimp
