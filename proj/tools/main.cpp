// datalqg command line: data-driven LQG synthesis experiments.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "datalqg/experiment.hpp"

namespace {

using namespace datalqg;

int cmd_noiseless_demo(const std::string& config_path, const std::vector<std::string>& overrides,
                       const std::string& out_path) {
  const ExperimentConfig config = ExperimentConfig::from_file(config_path, overrides);
  const NoiselessDemoReport report = run_noiseless_demo(config);
  std::printf("model-based cost      J = %.6f\n", report.J_model);
  std::printf("data-driven cost      J = %.6f\n", report.J_data);
  std::printf("relative cost diff      = %.3e\n", report.relative_cost_diff);
  std::printf("controller diff ||dK||  = %.3e\n", report.controller_diff);
  std::printf("PE rank                 = %lld / %lld\n",
              static_cast<long long>(report.pe_rank), static_cast<long long>(report.pe_required));
  std::printf("runtime                 = %.1f ms\n", report.runtime_ms);
  if (!out_path.empty()) {
    write_synthesis_result(report.data_result, out_path);
    std::printf("wrote %s\n", out_path.c_str());
  }
  return 0;
}

int cmd_robust_sweep(const std::string& config_path, const std::vector<std::string>& overrides,
                     std::string out_path, int workers) {
  ExperimentConfig config = ExperimentConfig::from_file(config_path, overrides);
  if (workers >= 0) config.workers = workers;
  if (out_path.empty()) out_path = config.output_path;
  const auto cals = run_epsilon_calibration(config);
  const auto records = run_robust_sweep(config);
  emit_csv(records, out_path);
  write_sweep_metadata(config, cals, out_path);
  int failed = 0;
  for (const auto& r : records)
    if (r.status.rfind("error", 0) == 0) ++failed;
  std::printf("wrote %s (%zu rows, %d failed cells)\n", out_path.c_str(), records.size(), failed);
  return 0;
}

int cmd_calibrate(const std::string& config_path, const std::vector<std::string>& overrides,
                  const std::string& out_path) {
  const ExperimentConfig config = ExperimentConfig::from_file(config_path, overrides);
  const auto cals = run_epsilon_calibration(config);
  std::printf("rho,sigma,epsilon\n");
  for (const auto& c : cals) std::printf("%.12g,%.12g,%.12g\n", c.rho, c.sigma, c.epsilon);
  if (!out_path.empty()) {
    std::FILE* f = std::fopen(out_path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + out_path);
    std::fprintf(f, "rho,sigma,epsilon\n");
    for (const auto& c : cals) std::fprintf(f, "%.12g,%.12g,%.12g\n", c.rho, c.sigma, c.epsilon);
    std::fclose(f);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven finite-horizon LQG synthesis experiments"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  std::vector<std::string> overrides;
  int workers = -1;

  auto* demo = app.add_subcommand("noiseless-demo",
                                  "Model-based vs data-driven synthesis on noiseless data");
  demo->add_option("--config", config_path, "experiment config file")->required();
  demo->add_option("--set", overrides, "config override, e.g. --set \"rho_demo = 0.9\"");
  demo->add_option("--out", out_path, "write the data-driven synthesis result (JSON)");

  auto* sweep = app.add_subcommand("robust-sweep", "Run the (rho, sigma) suboptimality sweep");
  sweep->add_option("--config", config_path, "experiment config file")->required();
  sweep->add_option("--out", out_path, "output CSV path (default: config output_path)");
  sweep->add_option("--workers", workers, "worker thread count (default: config / hardware)");
  sweep->add_option("--set", overrides, "config override");

  auto* cal = app.add_subcommand("calibrate-epsilon",
                                 "Estimate the error level per (rho, sigma) grid point");
  cal->add_option("--config", config_path, "experiment config file")->required();
  cal->add_option("--out", out_path, "also write the table to this CSV file");
  cal->add_option("--set", overrides, "config override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (demo->parsed()) return cmd_noiseless_demo(config_path, overrides, out_path);
    if (sweep->parsed()) return cmd_robust_sweep(config_path, overrides, out_path, workers);
    if (cal->parsed()) return cmd_calibrate(config_path, overrides, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
