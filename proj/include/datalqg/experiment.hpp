#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "datalqg/behavior.hpp"
#include "datalqg/config.hpp"
#include "datalqg/lti_plant.hpp"
#include "datalqg/robust_synthesis.hpp"

namespace datalqg {

/// Everything a reproducible experiment run needs. Defaults reproduce the
/// reference two-state plant study.
struct ExperimentConfig {
  Matrix A_template;  // A = rho * A_template
  Matrix B;
  Matrix C;
  Vector x0;
  std::vector<double> rho_grid;
  std::vector<double> sigma_grid;
  double rho_demo = 0.99;

  Index horizon = 11;  // N
  Index T = 200;
  Index T_h = 249;
  Index T_ini = 30;
  double excitation_std = 1.0;

  int n_calibration_realizations = 100;
  double percentile = 90.0;
  int n_sweep_seeds = 10;
  double alpha = -1.0;  // <= 0: automatic policy

  RobustConfig robust;
  std::uint64_t master_seed = 1u;
  int workers = 0;  // 0: hardware concurrency
  std::string output_path = "sweep.csv";

  static ExperimentConfig defaults();
  static ExperimentConfig from_file(const std::string& path,
                                    const std::vector<std::string>& overrides = {});
  static ExperimentConfig from_config(const ConfigFile& file);

  void validate() const;
  StateSpacePlant plant_for(double rho) const;
  DataGenConfig data_gen(double sigma) const;
};

struct NoiselessDemoReport {
  double J_model = 0.0;
  double J_data = 0.0;
  double relative_cost_diff = 0.0;
  double controller_diff = 0.0;  // ||K_model - K_data||_F
  Index pe_rank = 0;
  Index pe_required = 0;
  double runtime_ms = 0.0;
  SynthesisResult model_result;
  SynthesisResult data_result;
};

/// Model-based synthesis vs data-driven synthesis on one noiseless data
/// library; errors when the generated historical input fails the persistency
/// check.
NoiselessDemoReport run_noiseless_demo(const ExperimentConfig& config);

struct SweepRecord {
  double rho = 0.0;
  double sigma = 0.0;
  double epsilon = 0.0;
  double J_star = 0.0;
  double J_hat = 0.0;
  double gap = 0.0;  // (J_hat^2 - J_star^2) / J_star^2
  double bound = 0.0;
  double gamma_star = 0.0;
  double runtime_ms = 0.0;
  std::uint64_t seed = 0;
  /// Whether the a-priori bound certificate applies to this cell: the
  /// eps/alpha hypotheses hold and the realized estimation errors are within
  /// the calibrated epsilon.
  bool bound_valid = false;
  std::string status = "ok";
};

/// The (rho, sigma) sweep: per cell, calibrate epsilon, draw fresh noisy
/// data, synthesize the robust controller, evaluate it on the true plant and
/// record the suboptimality gap against the exact optimum. Per-cell failures
/// are recorded in the row's status, never abort the sweep. Rows sorted by
/// (rho, sigma, seed index).
std::vector<SweepRecord> run_robust_sweep(const ExperimentConfig& config);

struct CalibrationRecord {
  double rho = 0.0;
  double sigma = 0.0;
  double epsilon = 0.0;
};

std::vector<CalibrationRecord> run_epsilon_calibration(const ExperimentConfig& config);

/// One header row then one line per record, 12 significant digits.
void emit_csv(const std::vector<SweepRecord>& records, const std::string& path);
std::vector<SweepRecord> parse_sweep_csv(const std::string& path);

/// Sidecar metadata: seed, percentile, realization counts and per-cell
/// epsilons, written next to the CSV as <path>.meta.json.
void write_sweep_metadata(const ExperimentConfig& config,
                          const std::vector<CalibrationRecord>& calibrations,
                          const std::string& csv_path);

}  // namespace datalqg
