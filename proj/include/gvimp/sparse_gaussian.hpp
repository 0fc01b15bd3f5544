#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "gvimp/block_tridiagonal.hpp"
#include "gvimp/core.hpp"

namespace gvimp {

/// Block LDL^T of a symmetric positive-definite block-tridiagonal matrix.
///
/// L has identity diagonal blocks and a single band of sub-diagonal blocks
/// L_{i+1,i}; no other block fills in. Each pivot D_i is kept together with its
/// Cholesky factor, which both proves positive definiteness and serves the solves.
class LdlFactorization {
 public:
  Index num_blocks() const { return static_cast<Index>(d_.size()); }
  Index block_dim() const { return d_.empty() ? 0 : d_.front().rows(); }
  Index dim() const { return num_blocks() * block_dim(); }

  /// D_i.
  const Matrix& pivot(Index i) const { return d_.at(static_cast<std::size_t>(i)); }
  /// L_{i+1,i}.
  const Matrix& lower(Index i) const { return l_.at(static_cast<std::size_t>(i)); }
  /// Lower Cholesky factor C_i of D_i.
  Matrix pivot_sqrt(Index i) const { return chol_.at(static_cast<std::size_t>(i)).matrixL(); }

  Matrix dense_l() const {
    const Index d = block_dim();
    Matrix out = Matrix::Identity(dim(), dim());
    for (Index i = 0; i + 1 < num_blocks(); ++i) out.block((i + 1) * d, i * d, d, d) = lower(i);
    return out;
  }

  Matrix dense_d() const {
    const Index d = block_dim();
    Matrix out = Matrix::Zero(dim(), dim());
    for (Index i = 0; i < num_blocks(); ++i) out.block(i * d, i * d, d, d) = pivot(i);
    return out;
  }

 private:
  friend LdlFactorization ldl_decompose(const BlockTridiagonalMatrix& y);
  friend Vector solve(const LdlFactorization& f, const Vector& rhs);

  Matrix pivot_solve(Index i, const Matrix& rhs) const { return chol_[static_cast<std::size_t>(i)].solve(rhs); }

  std::vector<Matrix> d_;
  std::vector<Matrix> l_;
  std::vector<Eigen::LLT<Matrix>> chol_;
};

/// Y = L D L^T, throwing NumericalError (carrying the block index) on a pivot
/// block that is not positive definite.
inline LdlFactorization ldl_decompose(const BlockTridiagonalMatrix& y) {
  LdlFactorization f;
  const Index n = y.num_blocks();
  f.d_.reserve(static_cast<std::size_t>(n));
  f.l_.reserve(static_cast<std::size_t>(n > 0 ? n - 1 : 0));
  f.chol_.reserve(static_cast<std::size_t>(n));

  Matrix pivot = y.diag(0);
  for (Index i = 0; i < n; ++i) {
    pivot = 0.5 * (pivot + pivot.transpose()).eval();
    Eigen::LLT<Matrix> llt(pivot);
    if (llt.info() != Eigen::Success || !pivot.allFinite()) {
      throw NumericalError("ldl_decompose: pivot block " + std::to_string(i) + " is not positive definite", i);
    }
    f.d_.push_back(pivot);
    f.chol_.push_back(std::move(llt));
    if (i + 1 < n) {
      // L_{i+1,i} = Y_{i+1,i} D_i^{-1}  (D_i symmetric, so solve on the transpose)
      const Matrix li = f.chol_.back().solve(y.lower(i).transpose()).transpose();
      pivot = y.diag(i + 1) - li * y.lower(i).transpose();
      f.l_.push_back(li);
    }
  }
  return f;
}

/// Blocks of Y^{-1} on the band of Y: diagonal blocks and the (i+1, i) blocks.
struct PartialCovariance {
  BlockTridiagonalMatrix blocks;

  Index num_blocks() const { return blocks.num_blocks(); }
  const Matrix& diag(Index i) const { return blocks.diag(i); }
  /// Cov(x_{i+1}, x_i).
  const Matrix& cross(Index i) const { return blocks.lower(i); }
};

/// Backward recursion Y^{-1} = L^{-T} D^{-1} + Y^{-1} (I - L) restricted to the band:
///   S_NN = D_N^{-1},
///   S_{i+1,i} = -S_{i+1,i+1} L_{i+1,i},
///   S_ii = D_i^{-1} - S_{i+1,i}^T L_{i+1,i}.
inline PartialCovariance partial_inverse(const LdlFactorization& f) {
  const Index n = f.num_blocks();
  const Index d = f.block_dim();
  PartialCovariance out{BlockTridiagonalMatrix(n, d)};
  const Matrix eye = Matrix::Identity(d, d);
  auto d_inverse = [&](Index i) {
    const Matrix c_inv = f.pivot_sqrt(i).triangularView<Eigen::Lower>().solve(eye);
    return Matrix(c_inv.transpose() * c_inv);
  };
  out.blocks.diag(n - 1) = d_inverse(n - 1);
  for (Index i = n - 2; i >= 0; --i) {
    const Matrix& li = f.lower(i);
    out.blocks.lower(i) = -out.blocks.diag(i + 1) * li;
    out.blocks.diag(i) = d_inverse(i) - out.blocks.lower(i).transpose() * li;
  }
  out.blocks.symmetrize();
  return out;
}

/// x with Y x = rhs: forward, pivot, then backward substitution.
inline Vector solve(const LdlFactorization& f, const Vector& rhs) {
  const Index n = f.num_blocks();
  const Index d = f.block_dim();
  if (rhs.size() != f.dim()) throw ShapeError("solve: right-hand side has wrong size");
  Vector x = rhs;
  for (Index i = 0; i + 1 < n; ++i) x.segment((i + 1) * d, d) -= f.lower(i) * x.segment(i * d, d);
  for (Index i = 0; i < n; ++i) x.segment(i * d, d) = f.pivot_solve(i, x.segment(i * d, d));
  for (Index i = n - 2; i >= 0; --i) x.segment(i * d, d) -= f.lower(i).transpose() * x.segment((i + 1) * d, d);
  return x;
}

/// log det Y = sum_i log det D_i.
inline double log_det(const LdlFactorization& f) {
  double acc = 0.0;
  for (Index i = 0; i < f.num_blocks(); ++i) {
    acc += 2.0 * f.pivot_sqrt(i).diagonal().array().log().sum();
  }
  return acc;
}

/// One draw from N(mean, Y^{-1}) where f factors the precision Y:
/// solve C^T L^T (x - mean) = z per block, with D_i = C_i C_i^T and z ~ N(0, I).
template <class Rng>
Vector sample_gaussian(const LdlFactorization& f, const Vector& mean, Rng& rng) {
  const Index n = f.num_blocks();
  const Index d = f.block_dim();
  if (mean.size() != f.dim()) throw ShapeError("sample_gaussian: mean has wrong size");
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(f.dim());
  for (Index k = 0; k < x.size(); ++k) x(k) = normal(rng);
  for (Index i = 0; i < n; ++i) {
    const Matrix c = f.pivot_sqrt(i);
    x.segment(i * d, d) = c.transpose().triangularView<Eigen::Upper>().solve(x.segment(i * d, d));
  }
  for (Index i = n - 2; i >= 0; --i) x.segment(i * d, d) -= f.lower(i).transpose() * x.segment((i + 1) * d, d);
  return x + mean;
}

}  // namespace gvimp
