#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "datalqg/block_linalg.hpp"
#include "datalqg/lti_plant.hpp"

namespace datalqg {

/// Recorded input-output data: one long historical trajectory for the
/// non-parametric system description and a recent trajectory pinning the
/// (unknown) initial state.
struct DataLibrary {
  Trajectory historical;  // length T
  Trajectory recent;      // length T_ini, ends right before time 0

  Index input_dim() const { return historical.input_dim; }
  Index output_dim() const { return historical.output_dim; }
  void check_dimensions() const;
};

/// Depth-(T_ini + N) Hankel matrices of the historical data, partitioned into
/// past (first T_ini block rows) and future (last N block rows).
struct HankelSplit {
  Matrix U_p;  // m*T_ini x W
  Matrix U_f;  // m*N x W
  Matrix Y_p;  // p*T_ini x W
  Matrix Y_f;  // p*N x W
  Index T_ini = 0;
  Index horizon = 0;
  Index width = 0;  // W = T - (T_ini + N) + 1
};

/// Estimated behavioral model: the first block column of the impulse-response
/// Toeplitz matrix, the free response, and the error level the robust layer
/// should assume.
struct BehavioralModel {
  enum class Provenance { exact, least_squares };

  BlockColumn G_hat_col;  // N blocks of p x m, h_0 forced to zero
  Vector y_free_hat;      // pN
  double epsilon = 0.0;
  Provenance provenance = Provenance::least_squares;

  Index horizon() const { return G_hat_col.n_blocks; }
  Index input_dim() const { return G_hat_col.block_cols; }
  Index output_dim() const { return G_hat_col.block_rows; }
  Matrix toeplitz() const { return build_toeplitz(G_hat_col); }
};

struct PersistencyResult {
  bool excited = false;
  Index rank = 0;
  Index required = 0;
};

/// Persistency of excitation of the given order: the depth-`order` Hankel
/// matrix of u must have full row rank.
PersistencyResult is_persistently_exciting(const Vector& u, Index input_dim, Index order,
                                           double tol = kPinvTol);

HankelSplit split_hankels(const DataLibrary& data, Index T_ini, Index horizon);

struct BehavioralSolution {
  Matrix G;         // W x m
  Vector g;         // W
  double residual;  // Frobenius residual of the stacked linear system
};

/// Minimum-norm solution (G, g) of the behavioral linear system
///   [U_p; Y_p; U_f] [G g] = [0 u_r; 0 y_r; E_1 0],
/// where E_1 selects a unit impulse on the first future input block.
/// With `require_consistent`, a residual above `tol` (noisy or insufficiently
/// exciting data) is an error.
BehavioralSolution solve_behavioral_system(const HankelSplit& split, const Trajectory& recent,
                                           bool require_consistent = true, double tol = 1e-8);

/// Least-squares behavioral model from (possibly noisy) data: the same
/// pseudoinverse solution with Ghat = Toep(Y_f G), y_free_hat = Y_f g, and the
/// h_0 block zeroed to keep Ghat strictly causal. epsilon is left at zero;
/// calibrate separately.
BehavioralModel least_squares_model(const HankelSplit& split, const Trajectory& recent);

/// How experiment data gets manufactured: one run of length T_h ending right
/// before time 0, driven by unit-variance Gaussian excitation plus input
/// noise, with the final commanded inputs steered so the state at time 0
/// equals the plant's x0 exactly. Historical data are the first T samples,
/// recent data the last T_ini.
struct DataGenConfig {
  Index T = 200;
  Index T_h = 249;
  Index T_ini = 30;
  Index horizon = 11;          // N, used by estimation/calibration
  double sigma = 0.0;          // noise standard deviation (covariance sigma^2 I)
  double excitation_std = 1.0;
};

struct GeneratedData {
  DataLibrary library;
  Vector x0_true;  // realized state at time 0 (equals plant.x0 up to roundoff)
};

GeneratedData generate_data_library(const StateSpacePlant& plant, const DataGenConfig& cfg,
                                    std::uint64_t seed);

struct EpsilonCalibration {
  double epsilon = 0.0;
  double percentile = 0.0;
  std::vector<double> samples;  // one estimation error per realization
};

/// Draws n_realizations independent noisy data libraries, computes the
/// estimation error max(||Ghat - G||_2, ||y_free_hat - y_free||_2) against
/// simulator ground truth for each, and returns the requested percentile.
EpsilonCalibration calibrate_epsilon(const StateSpacePlant& plant, const DataGenConfig& cfg,
                                     Index n_realizations, double percentile, std::uint64_t seed);

/// CSV trajectory exchange, one sample per row: time, u components, y components.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(const std::string& path, Index input_dim, Index output_dim);

}  // namespace datalqg
