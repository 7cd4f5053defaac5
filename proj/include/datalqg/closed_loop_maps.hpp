#pragma once

#include "datalqg/block_linalg.hpp"

namespace datalqg {

/// The four causal closed-loop responses mapping stacked output/input
/// disturbances to stacked outputs/inputs under feedback:
///
///   [y]   [yy  yu] [v + y_free]
///   [u] = [uy  uu] [w         ]
///
/// All blocks are block-lower-triangular; yy and uu carry identity diagonal
/// blocks and yy is invertible by construction.
struct ClosedLoopMaps {
  Matrix yy;  // pN x pN
  Matrix yu;  // pN x mN
  Matrix uy;  // mN x pN
  Matrix uu;  // mN x mN
  Index horizon = 0;
  Index input_dim = 0;   // m
  Index output_dim = 0;  // p

  ClosedLoopMaps() = default;
  ClosedLoopMaps(Matrix yy_, Matrix yu_, Matrix uy_, Matrix uu_, Index horizon_, Index input_dim_,
                 Index output_dim_);

  void check_dimensions() const;

  /// Frobenius magnitude of entries violating the block-causal patterns,
  /// maximized over the four responses.
  double causality_violation() const;
};

}  // namespace datalqg
