#pragma once

#include <cmath>
#include <vector>

#include "gvimp/core.hpp"

namespace gvimp {

/// Symmetric block-tridiagonal matrix with `num_blocks` square blocks of size `block_dim`.
///
/// Only the diagonal blocks D_0..D_{n-1} and the sub-diagonal blocks L_i = A(i+1, i)
/// are stored. The super-diagonal is implied by symmetry, and every block outside the
/// band is structurally zero: there is no storage for it, so no update can fill it.
class BlockTridiagonalMatrix {
 public:
  BlockTridiagonalMatrix() = default;

  BlockTridiagonalMatrix(Index num_blocks, Index block_dim)
      : block_dim_(block_dim),
        diag_(static_cast<std::size_t>(num_blocks), Matrix::Zero(block_dim, block_dim)),
        lower_(static_cast<std::size_t>(num_blocks > 0 ? num_blocks - 1 : 0),
               Matrix::Zero(block_dim, block_dim)) {
    if (num_blocks < 1 || block_dim < 1) {
      throw DomainError("BlockTridiagonalMatrix: need at least one block of positive size");
    }
  }

  static BlockTridiagonalMatrix zero(Index num_blocks, Index block_dim) {
    return {num_blocks, block_dim};
  }

  static BlockTridiagonalMatrix identity(Index num_blocks, Index block_dim, double scale = 1.0) {
    BlockTridiagonalMatrix m(num_blocks, block_dim);
    for (auto& d : m.diag_) d = scale * Matrix::Identity(block_dim, block_dim);
    return m;
  }

  /// Extracts the band of a dense symmetric matrix. Entries outside the band are ignored.
  static BlockTridiagonalMatrix from_dense(const Matrix& dense, Index block_dim) {
    if (dense.rows() != dense.cols() || block_dim < 1 || dense.rows() % block_dim != 0) {
      throw ShapeError("from_dense: matrix is not square or not divisible into blocks");
    }
    BlockTridiagonalMatrix m(dense.rows() / block_dim, block_dim);
    for (Index i = 0; i < m.num_blocks(); ++i) {
      m.diag(i) = dense.block(i * block_dim, i * block_dim, block_dim, block_dim);
      if (i + 1 < m.num_blocks()) {
        m.lower(i) = dense.block((i + 1) * block_dim, i * block_dim, block_dim, block_dim);
      }
    }
    return m;
  }

  Index num_blocks() const { return static_cast<Index>(diag_.size()); }
  Index block_dim() const { return block_dim_; }
  Index dim() const { return num_blocks() * block_dim_; }
  bool symmetric() const { return true; }

  Matrix& diag(Index i) { return diag_.at(static_cast<std::size_t>(i)); }
  const Matrix& diag(Index i) const { return diag_.at(static_cast<std::size_t>(i)); }

  /// Block (i+1, i).
  Matrix& lower(Index i) { return lower_.at(static_cast<std::size_t>(i)); }
  const Matrix& lower(Index i) const { return lower_.at(static_cast<std::size_t>(i)); }

  /// Block (row, col) by value; zero outside the band.
  Matrix block(Index row, Index col) const {
    if (row == col) return diag(row);
    if (row == col + 1) return lower(col);
    if (col == row + 1) return lower(row).transpose();
    return Matrix::Zero(block_dim_, block_dim_);
  }

  /// Adds `value` to block (row, col) and, for off-diagonal blocks, its transpose to
  /// (col, row). Throws StructuralError outside the band.
  void add_block(Index row, Index col, const Matrix& value) {
    if (row == col) {
      diag(row) += value;
    } else if (row == col + 1) {
      lower(col) += value;
    } else if (col == row + 1) {
      lower(row) += value.transpose();
    } else {
      throw StructuralError("add_block: (" + std::to_string(row) + ", " + std::to_string(col) +
                            ") lies outside the block-tridiagonal band");
    }
  }

  Matrix to_dense() const {
    const Index d = block_dim_;
    Matrix out = Matrix::Zero(dim(), dim());
    for (Index i = 0; i < num_blocks(); ++i) {
      out.block(i * d, i * d, d, d) = diag(i);
      if (i + 1 < num_blocks()) {
        out.block((i + 1) * d, i * d, d, d) = lower(i);
        out.block(i * d, (i + 1) * d, d, d) = lower(i).transpose();
      }
    }
    return out;
  }

  Vector operator*(const Vector& x) const {
    if (x.size() != dim()) throw ShapeError("BlockTridiagonalMatrix * vector: size mismatch");
    const Index d = block_dim_;
    Vector y = Vector::Zero(dim());
    for (Index i = 0; i < num_blocks(); ++i) {
      y.segment(i * d, d) += diag(i) * x.segment(i * d, d);
      if (i + 1 < num_blocks()) {
        y.segment((i + 1) * d, d) += lower(i) * x.segment(i * d, d);
        y.segment(i * d, d) += lower(i).transpose() * x.segment((i + 1) * d, d);
      }
    }
    return y;
  }

  /// this + scale * other, block by block.
  BlockTridiagonalMatrix axpy(double scale, const BlockTridiagonalMatrix& other) const {
    check_same_shape(other);
    BlockTridiagonalMatrix out = *this;
    for (Index i = 0; i < num_blocks(); ++i) {
      out.diag(i) += scale * other.diag(i);
      if (i + 1 < num_blocks()) out.lower(i) += scale * other.lower(i);
    }
    return out;
  }

  BlockTridiagonalMatrix operator+(const BlockTridiagonalMatrix& o) const { return axpy(1.0, o); }
  BlockTridiagonalMatrix operator-(const BlockTridiagonalMatrix& o) const { return axpy(-1.0, o); }

  BlockTridiagonalMatrix scaled(double s) const {
    BlockTridiagonalMatrix out = *this;
    for (auto& b : out.diag_) b *= s;
    for (auto& b : out.lower_) b *= s;
    return out;
  }

  /// Largest absolute entry over the stored band.
  double max_abs() const {
    double m = 0.0;
    for (const auto& b : diag_) m = std::max(m, b.cwiseAbs().maxCoeff());
    for (const auto& b : lower_) m = std::max(m, b.cwiseAbs().maxCoeff());
    return m;
  }

  /// Symmetrizes the diagonal blocks in place (rounding can make them drift).
  void symmetrize() {
    for (auto& b : diag_) b = 0.5 * (b + b.transpose()).eval();
  }

 private:
  void check_same_shape(const BlockTridiagonalMatrix& o) const {
    if (o.num_blocks() != num_blocks() || o.block_dim() != block_dim()) {
      throw ShapeError("BlockTridiagonalMatrix: shape mismatch");
    }
  }

  Index block_dim_ = 0;
  std::vector<Matrix> diag_;
  std::vector<Matrix> lower_;
};

}  // namespace gvimp
