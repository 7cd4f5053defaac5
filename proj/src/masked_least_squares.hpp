#pragma once

// Internal machinery shared by the nominal and robust synthesis paths:
// quadratics of the form f(X) = sum_i ||P_i X Q_i + R_i||_F^2 restricted to a
// masked entry pattern of X.

#include <utility>
#include <vector>

#include "datalqg/block_linalg.hpp"
#include "datalqg/iop_synthesis.hpp"

namespace datalqg::detail {

struct QuadTerm {
  Matrix P;   // rows_P x rows_X
  Matrix Q;   // cols_X x cols_Q
  Matrix R0;  // rows_P x cols_Q
};

struct MaskedPattern {
  BoolMask mask;
  std::vector<std::pair<Index, Index>> entries;  // (row, col) of free entries

  explicit MaskedPattern(BoolMask m) : mask(std::move(m)) {
    for (Index c = 0; c < mask.cols(); ++c)
      for (Index r = 0; r < mask.rows(); ++r)
        if (mask(r, c)) entries.emplace_back(r, c);
  }
  Index size() const { return static_cast<Index>(entries.size()); }
};

inline double objective(const std::vector<QuadTerm>& terms, const Matrix& X) {
  double f = 0.0;
  for (const auto& t : terms) f += (t.P * X * t.Q + t.R0).squaredNorm();
  return f;
}

inline Matrix gradient(const std::vector<QuadTerm>& terms, const Matrix& X,
                       const MaskedPattern& pat) {
  Matrix g = Matrix::Zero(X.rows(), X.cols());
  for (const auto& t : terms) g += 2.0 * t.P.transpose() * (t.P * X * t.Q + t.R0) * t.Q.transpose();
  return apply_mask(g, pat.mask);
}

/// Action of the (masked) Hessian on a masked direction.
inline Matrix hessian_apply(const std::vector<QuadTerm>& terms, const Matrix& X,
                            const MaskedPattern& pat) {
  Matrix h = Matrix::Zero(X.rows(), X.cols());
  for (const auto& t : terms) h += 2.0 * t.P.transpose() * (t.P * X * t.Q) * t.Q.transpose();
  return apply_mask(h, pat.mask);
}

/// Largest Hessian eigenvalue by power iteration (gradient Lipschitz constant).
double lipschitz_estimate(const std::vector<QuadTerm>& terms, const MaskedPattern& pat,
                          Index iters = 40);

/// Exact minimizer of the masked quadratic. Dense normal equations with a
/// Cholesky solve below opts.dense_threshold unknowns, conjugate gradient
/// above. Returns the minimizer; *objective_out (optional) gets f(X*).
Matrix minimize(const std::vector<QuadTerm>& terms, const MaskedPattern& pat,
                const NominalOptions& opts, double* objective_out);

}  // namespace datalqg::detail
