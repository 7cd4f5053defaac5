#pragma once

#include <Eigen/Dense>

namespace datalqg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using BoolMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Default relative cutoff for numerical rank / pseudoinverse truncation.
inline constexpr double kPinvTol = 1e-10;

/// Ordered stack of equally sized blocks [M_1; M_2; ...; M_N], stored as one
/// dense (N*rows) x cols matrix with block metadata.
struct BlockColumn {
  Matrix data;          // (n_blocks * block_rows) x block_cols
  Index block_rows = 0;
  Index block_cols = 0;
  Index n_blocks = 0;

  BlockColumn() = default;
  BlockColumn(Matrix stacked, Index rows_per_block);

  Matrix block(Index i) const { return data.middleRows(i * block_rows, block_rows); }
  void set_block(Index i, const Matrix& b);

  static BlockColumn zeros(Index n_blocks, Index rows, Index cols);
};

/// Hankel matrix of a stacked trajectory, entry block (i, j) = sample(i + j).
struct HankelMatrix {
  Matrix data;      // (dim * depth) x (T - depth + 1)
  Index depth = 0;
  Index dim = 0;
  Index source_length = 0;
};

/// Block-lower-triangular Toeplitz matrix with col's blocks down the first
/// block column: block (i, j) = M_{i-j+1} for i >= j, zero above.
Matrix build_toeplitz(const BlockColumn& col);

/// First block column of a block-Toeplitz matrix (inverse of build_toeplitz).
BlockColumn toeplitz_first_column(const Matrix& toeplitz, Index block_rows, Index block_cols);

/// Depth-L Hankel matrix of a trajectory with dim-dimensional samples.
HankelMatrix build_hankel(const Vector& traj, Index dim, Index depth);

/// Block causality pattern: true on block (i, j) iff i >= j (i > j if strictly).
BoolMask causal_mask(Index n_blocks, Index block_rows, Index block_cols, bool strictly = false);

Matrix apply_mask(const Matrix& m, const BoolMask& mask);

/// Frobenius norm of the entries that violate the mask.
double mask_violation(const Matrix& m, const BoolMask& mask);

/// Moore-Penrose pseudoinverse; singular values below rel_tol * sigma_max are
/// treated as zero.
Matrix pseudoinverse(const Matrix& m, double rel_tol = kPinvTol);

Index matrix_rank(const Matrix& m, double rel_tol = kPinvTol);

/// Largest singular value.
double spectral_norm(const Matrix& m);

/// Frobenius-nearest matrix with spectral norm <= radius (singular values
/// clipped at radius).
Matrix project_spectral_ball(const Matrix& m, double radius);

}  // namespace datalqg
