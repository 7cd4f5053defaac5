#include "datalqg/block_linalg.hpp"

#include <Eigen/SVD>
#include <stdexcept>

namespace datalqg {

BlockColumn::BlockColumn(Matrix stacked, Index rows_per_block) {
  if (rows_per_block <= 0) throw std::invalid_argument("BlockColumn: block_rows must be positive");
  if (stacked.rows() == 0 || stacked.rows() % rows_per_block != 0)
    throw std::invalid_argument("BlockColumn: stacked height not a multiple of block_rows");
  data = std::move(stacked);
  block_rows = rows_per_block;
  block_cols = data.cols();
  n_blocks = data.rows() / rows_per_block;
}

void BlockColumn::set_block(Index i, const Matrix& b) {
  if (b.rows() != block_rows || b.cols() != block_cols)
    throw std::invalid_argument("BlockColumn::set_block: dimension mismatch among blocks");
  data.middleRows(i * block_rows, block_rows) = b;
}

BlockColumn BlockColumn::zeros(Index n_blocks, Index rows, Index cols) {
  return BlockColumn(Matrix::Zero(n_blocks * rows, cols), rows);
}

Matrix build_toeplitz(const BlockColumn& col) {
  if (col.n_blocks < 1) throw std::invalid_argument("build_toeplitz: empty block column");
  const Index r = col.block_rows, c = col.block_cols, N = col.n_blocks;
  Matrix out = Matrix::Zero(N * r, N * c);
  for (Index i = 0; i < N; ++i)
    for (Index j = 0; j <= i; ++j)
      out.block(i * r, j * c, r, c) = col.data.middleRows((i - j) * r, r);
  return out;
}

BlockColumn toeplitz_first_column(const Matrix& toeplitz, Index block_rows, Index block_cols) {
  if (block_rows <= 0 || block_cols <= 0 || toeplitz.rows() % block_rows != 0 ||
      toeplitz.cols() % block_cols != 0 ||
      toeplitz.rows() / block_rows != toeplitz.cols() / block_cols)
    throw std::invalid_argument("toeplitz_first_column: inconsistent block dimensions");
  return BlockColumn(toeplitz.leftCols(block_cols), block_rows);
}

HankelMatrix build_hankel(const Vector& traj, Index dim, Index depth) {
  if (dim <= 0 || traj.size() % dim != 0)
    throw std::invalid_argument("build_hankel: trajectory length not a multiple of dim");
  const Index T = traj.size() / dim;
  if (depth < 1 || depth > T) throw std::invalid_argument("build_hankel: need 1 <= depth <= T");
  HankelMatrix h;
  h.depth = depth;
  h.dim = dim;
  h.source_length = T;
  h.data.resize(dim * depth, T - depth + 1);
  for (Index j = 0; j <= T - depth; ++j) h.data.col(j) = traj.segment(j * dim, dim * depth);
  return h;
}

BoolMask causal_mask(Index n_blocks, Index block_rows, Index block_cols, bool strictly) {
  if (n_blocks <= 0 || block_rows <= 0 || block_cols <= 0)
    throw std::invalid_argument("causal_mask: dimensions must be positive");
  BoolMask mask = BoolMask::Constant(n_blocks * block_rows, n_blocks * block_cols, false);
  for (Index i = 0; i < n_blocks; ++i) {
    const Index jmax = strictly ? i : i + 1;
    for (Index j = 0; j < jmax; ++j)
      mask.block(i * block_rows, j * block_cols, block_rows, block_cols) = true;
  }
  return mask;
}

Matrix apply_mask(const Matrix& m, const BoolMask& mask) {
  if (m.rows() != mask.rows() || m.cols() != mask.cols())
    throw std::invalid_argument("apply_mask: shape mismatch");
  return mask.select(m, Matrix::Zero(m.rows(), m.cols()));
}

double mask_violation(const Matrix& m, const BoolMask& mask) {
  if (m.rows() != mask.rows() || m.cols() != mask.cols())
    throw std::invalid_argument("mask_violation: shape mismatch");
  return mask.select(Matrix::Zero(m.rows(), m.cols()), m).norm();
}

Matrix pseudoinverse(const Matrix& m, double rel_tol) {
  if (!m.allFinite()) throw std::invalid_argument("pseudoinverse: non-finite input");
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return Matrix::Zero(m.cols(), m.rows());
  const double cutoff = rel_tol * s(0);
  Vector inv = Vector::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Index matrix_rank(const Matrix& m, double rel_tol) {
  if (!m.allFinite()) throw std::invalid_argument("matrix_rank: non-finite input");
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cutoff = rel_tol * s(0);
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) ++r;
  return r;
}

double spectral_norm(const Matrix& m) {
  if (!m.allFinite()) throw std::invalid_argument("spectral_norm: non-finite input");
  if (m.size() == 0) return 0.0;
  // JacobiSVD is faster for the small blocks this library handles
  if (m.rows() <= 64 && m.cols() <= 64)
    return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
  return Eigen::BDCSVD<Matrix>(m).singularValues()(0);
}

Matrix project_spectral_ball(const Matrix& m, double radius) {
  if (radius < 0) throw std::invalid_argument("project_spectral_ball: radius must be >= 0");
  if (!m.allFinite()) throw std::invalid_argument("project_spectral_ball: non-finite input");
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector s = svd.singularValues();
  if (s.size() == 0 || s(0) <= radius) return m;
  for (Index i = 0; i < s.size(); ++i) s(i) = std::min(s(i), radius);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

}  // namespace datalqg
