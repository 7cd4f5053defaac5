#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "datalqg/block_linalg.hpp"
#include "datalqg/closed_loop_maps.hpp"

namespace datalqg {

/// Ground-truth discrete-time LTI plant
///   x(t+1) = A x(t) + B u(t),   y(t) = C x(t) + v(t),   x(0) = x0.
/// Used for simulation and as the oracle side of the experiments.
struct StateSpacePlant {
  Matrix A;   // n x n
  Matrix B;   // n x m
  Matrix C;   // p x n
  Vector x0;  // n

  StateSpacePlant() = default;
  StateSpacePlant(Matrix A_, Matrix B_, Matrix C_, Vector x0_);

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }
  Index p() const { return C.rows(); }

  bool is_controllable(double tol = kPinvTol) const;
  bool is_observable(double tol = kPinvTol) const;

  /// Smallest l such that [C; CA; ...; CA^{l-1}] has full column rank, or
  /// nullopt when the pair (A, C) is unobservable.
  std::optional<Index> observability_lag(double tol = kPinvTol) const;
};

/// Zero-mean Gaussian disturbance model: measurement noise v ~ N(0, Sigma_v)
/// and input noise w ~ N(0, Sigma_w). Matrix square roots are cached for
/// sampling and for the stacked cost.
struct NoiseModel {
  Matrix sigma_v;  // p x p, PSD
  Matrix sigma_w;  // m x m, PSD
  Matrix sqrt_v;
  Matrix sqrt_w;

  NoiseModel() = default;
  NoiseModel(Matrix sigma_v_, Matrix sigma_w_);

  static NoiseModel identity(Index p, Index m);
  /// Sigma_v = sigma^2 I_p, Sigma_w = sigma^2 I_m (sigma is a standard deviation).
  static NoiseModel scaled_identity(Index p, Index m, double sigma);

  bool is_identity(double tol = 1e-12) const;
};

/// Per-step quadratic weights L_t (outputs) and R_t (inputs) over a horizon.
///
/// Stacked-cost convention: outputs are penalized for t = 0..N-1, inputs for
/// t = 0..N-2. The terminal input cannot influence any in-horizon output, so
/// its feedback term vanishes at every optimum and R_{N-1} only ever enters
/// the cost through a constant noise floor; the stacked objective omits it.
struct CostWeights {
  std::vector<Matrix> L;  // N matrices, p x p PSD
  std::vector<Matrix> R;  // N matrices, m x m PD
  Index horizon = 0;

  CostWeights() = default;
  CostWeights(std::vector<Matrix> L_, std::vector<Matrix> R_);

  static CostWeights identity(Index p, Index m, Index horizon);

  Index p() const { return L.empty() ? 0 : L.front().rows(); }
  Index m() const { return R.empty() ? 0 : R.front().rows(); }
  bool is_identity(double tol = 1e-12) const;

  /// blkdiag(L_0^{1/2}, ..., L_{N-1}^{1/2}), pN x pN.
  const Matrix& output_weight_sqrt() const { return l_sqrt_; }
  /// [blkdiag(R_0^{1/2}, ..., R_{N-2}^{1/2}), 0], m(N-1) x mN.
  const Matrix& input_weight_sqrt() const { return r_sqrt_; }

 private:
  Matrix l_sqrt_;
  Matrix r_sqrt_;
};

/// Finite-horizon input/output trajectory stored as stacked vectors.
struct Trajectory {
  Vector u;  // m*length
  Vector y;  // p*length
  Index length = 0;
  Index input_dim = 0;
  Index output_dim = 0;
  long start_index = 0;  // time offset of sample 0

  Eigen::VectorBlock<const Vector> sample_u(Index t) const {
    return u.segment(t * input_dim, input_dim);
  }
  Eigen::VectorBlock<const Vector> sample_y(Index t) const {
    return y.segment(t * output_dim, output_dim);
  }
  void check_dimensions() const;
};

struct SimulationResult {
  Trajectory trajectory;
  Vector v;      // realized measurement noise, p*horizon
  Vector w;      // realized input noise, m*horizon
  Vector x_end;  // state after the last step
};

/// Closed-loop simulation under u(t) = sum_{k<=t} K_{t,k} y(k) + w(t).
/// K must be block-causal (mN x pN). Deterministic for a fixed seed.
SimulationResult simulate_closed_loop(const StateSpacePlant& plant, const NoiseModel& noise,
                                      const Matrix& K, Index horizon, std::uint64_t seed);

/// Open-loop simulation with a commanded input: the applied input is
/// u(t) = u_ext(t) + w(t) and the returned trajectory records the applied u.
SimulationResult simulate_open_loop(const StateSpacePlant& plant, const NoiseModel& noise,
                                    const Vector& u_ext, std::uint64_t seed);

/// First `horizon` impulse-response blocks [h_0; ...; h_{N-1}] with h_0 = 0
/// and h_k = C A^{k-1} B (the output lags the input by one step).
BlockColumn impulse_response(const StateSpacePlant& plant, Index horizon);

/// Zero-input output response [C x0; C A x0; ...; C A^{N-1} x0].
Vector free_response(const StateSpacePlant& plant, Index horizon);

/// Exact expected quadratic cost J^2 of the closed-loop responses `maps` on
/// the plant described by (G, y_free), per the stacked 2x3 block objective.
/// Warns on stderr when the maps are not achievable for G.
double cost_closed_form(const Matrix& G, const Vector& y_free, const ClosedLoopMaps& maps,
                        const CostWeights& weights, const NoiseModel& noise);

struct CostEstimate {
  double mean = 0.0;       // estimate of J^2
  double stderr_ = 0.0;    // standard error of the mean
  Index n_trials = 0;
};

/// Monte-Carlo estimate of the same quadratic cost by simulating the plant
/// under the controller K.
CostEstimate cost_monte_carlo(const StateSpacePlant& plant, const Matrix& K,
                              const CostWeights& weights, const NoiseModel& noise, Index n_trials,
                              std::uint64_t seed);

}  // namespace datalqg
