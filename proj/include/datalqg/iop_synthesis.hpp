#pragma once

#include <string>

#include "datalqg/block_linalg.hpp"
#include "datalqg/closed_loop_maps.hpp"
#include "datalqg/lti_plant.hpp"

namespace datalqg {

/// Closed-loop responses of a causal controller K on the strictly causal
/// impulse-response matrix G:
///   yy = (I - GK)^{-1}, yu = yy G, uy = K yy, uu = (I - KG)^{-1}.
/// (I - GK) is unipotent block-lower-triangular, so the inverse always exists.
ClosedLoopMaps maps_from_controller(const Matrix& G, const Matrix& K, Index horizon,
                                    Index input_dim, Index output_dim);

/// K = uy * yy^{-1}. Errors when the maps violate their causal patterns or
/// yy is numerically singular.
Matrix controller_from_maps(const ClosedLoopMaps& maps);

/// The unique achievable quadruple for a given causal Phi_uy:
///   yy = I + G uy, yu = yy G, uu = I + uy G.
/// Reduces every synthesis program to an optimization over Phi_uy alone.
ClosedLoopMaps eliminate(const Matrix& G, const Matrix& Phi_uy, Index horizon, Index input_dim,
                         Index output_dim);

/// Max of the two affine-constraint Frobenius residuals and the causal-mask
/// violation; zero iff the maps are achievable for G.
double achievability_residual(const Matrix& G, const ClosedLoopMaps& maps);

struct NominalOptions {
  /// Above this many unknowns the normal equations are solved matrix-free
  /// with conjugate gradient instead of a dense Cholesky factorization.
  Index dense_threshold = 6000;
  Index cg_max_iter = 5000;
  double cg_tol = 1e-12;
};

struct SynthesisResult {
  ClosedLoopMaps maps;
  Matrix K;
  double cost = 0.0;     // J
  double cost_sq = 0.0;  // J^2
  std::string model;     // provenance note ("exact", "behavioral", ...)
};

/// Globally optimal output-feedback synthesis: minimizes the stacked LQG
/// objective over all achievable closed-loop responses. After elimination the
/// program is an unconstrained strongly convex least-squares problem in the
/// causal entries of Phi_uy (whose terminal block row is identically zero at
/// any optimum and is therefore pinned).
SynthesisResult solve_nominal(const Matrix& G, const Vector& y_free, const CostWeights& weights,
                              const NoiseModel& noise, const NominalOptions& opts = {});

void write_synthesis_result(const SynthesisResult& result, const std::string& path);

}  // namespace datalqg
