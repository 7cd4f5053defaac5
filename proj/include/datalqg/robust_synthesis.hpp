#pragma once

#include <string>
#include <vector>

#include "datalqg/behavior.hpp"
#include "datalqg/block_linalg.hpp"
#include "datalqg/closed_loop_maps.hpp"
#include "datalqg/iop_synthesis.hpp"

namespace datalqg {

/// Settings for the robust (noisy-data) synthesis path. The path assumes
/// identity cost weights and unit disturbance covariances; pre-whiten
/// otherwise.
struct RobustConfig {
  /// Error level; negative means "use the model's epsilon".
  double epsilon = -1.0;
  /// Spectral cap hyper-parameter; <= 0 selects the default policy
  /// 5 * ||Phi_uy|| of a preliminary nominal solve on Ghat, clipped below
  /// (1 - gamma_margin) / epsilon.
  double alpha = -1.0;
  /// Outer golden-section stop: interval width below golden_tol * gamma_max.
  double golden_tol = 1e-3;
  /// Upper end of the gamma interval is (1 - gamma_margin) / epsilon.
  double gamma_margin = 1e-3;
  /// Inner solver stop: relative objective decrease below this and the
  /// projected-gradient criterion satisfied.
  double inner_tol = 1e-11;
  /// Projected-gradient stop: ||pg|| <= pg_tol * (1 + objective).
  double pg_tol = 1e-7;
  int max_iter = 20000;
  /// Keep per-iteration objective values in the diagnostics.
  bool collect_history = false;
};

/// The scalar h of the error-inflation bound:
///   h(eps, b, y) = eps^2 (2 + b y)^2 + 2 eps y (2 + b y),  y = ||Y||_2.
double h_bound(double eps, double b, double y_norm);

struct InnerResult {
  ClosedLoopMaps maps;
  double J_inner = 0.0;      // nominal-consistent value, sqrt(F - m)
  double objective = 0.0;    // F, the full Frobenius-squared inner objective
  int iterations = 0;
  bool converged = true;
  bool constraint_active = false;
  double pg_norm = 0.0;
  bool monotone = true;              // accepted objective values never increased
  std::vector<double> history;       // filled when collect_history
};

/// Inner minimization of the quasi-convex program at a fixed gamma:
/// minimizes the h-weighted Frobenius objective over achievable maps for
/// Ghat subject to ||Phi_uy||_2 <= min(gamma, alpha). Solved on the
/// eliminated variable Phi_uy by accelerated projected gradient with exact
/// projection onto {causal} ∩ {spectral ball}; a plain Cholesky solve handles
/// the inactive-constraint case. Pass `radius = infinity` for unconstrained.
InnerResult inner_solve(const BehavioralModel& model, double gamma, double alpha,
                        const RobustConfig& config, const Matrix* warm_start = nullptr);

struct RobustSolution {
  double gamma_star = 0.0;
  ClosedLoopMaps maps;
  Matrix K_hat;
  double J_inner = 0.0;
  double upper_bound = 0.0;  // (1 - eps gamma*)^{-1} sqrt(F) at the optimum
  double eta = 0.0;          // eps * ||Phi_uy||_2 diagnostic
  double epsilon = 0.0;
  double alpha = 0.0;
  // diagnostics
  int golden_evaluations = 0;
  long total_inner_iterations = 0;
  bool all_converged = true;
  bool monotone = true;
  std::vector<std::vector<double>> histories;  // when collect_history
};

/// Golden-section search on gamma in [0, (1 - margin)/eps] minimizing
/// (1 - eps gamma)^{-1} * sqrt(inner objective), warm-starting each inner
/// solve from the nearest previously evaluated gamma. With eps = 0 the outer
/// factor is 1 and the result is the nominal solution for Ghat.
RobustSolution golden_search(const BehavioralModel& model, const RobustConfig& config);

struct FeasibleConstruction {
  ClosedLoopMaps maps;
  double gamma_tilde = 0.0;
};

/// Analytic feasible point of the robust program built from the exact-plant
/// optimal maps: the closed-loop responses of K* on Ghat = G + Delta, with
/// gamma_tilde = sqrt(2) eta / (eps (1 - eta)). Requires eta < 1/5 and
/// alpha >= gamma_tilde.
FeasibleConstruction feasible_from_nominal(const ClosedLoopMaps& star_maps, const Matrix& Delta,
                                           double eps, double alpha);

/// Exact cost of applying K_hat = uy * yy^{-1} (synthesized on the model) to
/// the true plant G = Ghat + Delta with true free response y_free_hat +
/// delta_0. Delta must be strictly causal so that I - Delta*Phi_uy is
/// invertible by nilpotency.
double true_cost_of_robust(const BehavioralModel& model, const ClosedLoopMaps& maps_hat,
                           const Matrix& Delta, const Vector& delta_0, const CostWeights& weights,
                           const NoiseModel& noise);

/// The h-weighted worst-case cost certificate
///   (1 - eps ||uy||)^{-1} ||[sqrt(1+hG+hy) yy, yu, yy yhat;
///                            sqrt(1+hy) uy,   uu, uy yhat]||_F.
/// Requires eps*||uy||_2 < 1 and ||uy||_2 <= alpha. Dominates the true cost
/// of the synthesized controller for every admissible (Delta, delta_0).
double lemma2_upper_bound(const ClosedLoopMaps& maps_hat, const BehavioralModel& model,
                          double alpha);

struct SuboptimalityBound {
  double value = 0.0;
  bool hypotheses_ok = false;  // eps < 1/(5||uy*||) and alpha inside the window
  double M = 0.0;
  double V = 0.0;
  double eta = 0.0;
};

/// A-priori relative-gap certificate 20 eps ||Phi*_uy|| + 4 (M + V). Computed
/// even when the hypotheses fail (flagged).
SuboptimalityBound suboptimality_bound(const ClosedLoopMaps& star_maps, double eps, double alpha,
                                       const Matrix& G, const Vector& y_free, const Matrix& G_hat,
                                       const Vector& y_free_hat);

void write_robust_solution(const RobustSolution& solution, const std::string& path);

}  // namespace datalqg
