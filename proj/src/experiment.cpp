#include "datalqg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "datalqg/rng.hpp"
#include "json.hpp"

namespace datalqg {

namespace {

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix();
  Matrix m(rows.size(), rows.front().size());
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  return m;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void run_parallel(Index n_tasks, int workers, const std::function<void(Index)>& task) {
  int k = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
  if (k < 1) k = 1;
  k = std::min<int>(k, static_cast<int>(n_tasks));
  if (k <= 1) {
    for (Index i = 0; i < n_tasks; ++i) task(i);
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::thread> pool;
  pool.reserve(k);
  for (int t = 0; t < k; ++t)
    pool.emplace_back([&] {
      for (Index i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) task(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.A_template = to_matrix({{0.8, 0.4}, {0.8, -0.6}});
  c.B = to_matrix({{1.0, 0.2}, {2.0, 0.3}});
  c.C = to_matrix({{1.0, 1.0}, {0.7, 0.2}});
  c.x0 = to_vector({1.0, -1.0});
  c.rho_grid = {0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99};
  c.sigma_grid = {0.0, 0.0005, 0.001, 0.002, 0.005, 0.01};
  c.master_seed = 20212021u;
  return c;
}

ExperimentConfig ExperimentConfig::from_config(const ConfigFile& file) {
  static const std::vector<std::string> known = {
      "A_template", "B", "C", "x0", "rho_grid", "sigma_grid", "rho_demo", "horizon", "T", "T_h",
      "T_ini", "excitation_std", "n_calibration_realizations", "percentile", "n_sweep_seeds",
      "alpha", "master_seed", "workers", "output_path", "golden_tol", "gamma_margin", "inner_tol",
      "pg_tol", "max_iter"};
  for (const auto& [k, v] : file.values())
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw std::runtime_error("config: unknown key '" + k + "'");

  ExperimentConfig c = defaults();
  if (file.contains("A_template")) c.A_template = to_matrix(file.at("A_template").as_matrix());
  if (file.contains("B")) c.B = to_matrix(file.at("B").as_matrix());
  if (file.contains("C")) c.C = to_matrix(file.at("C").as_matrix());
  if (file.contains("x0")) c.x0 = to_vector(file.at("x0").as_vector());
  if (file.contains("rho_grid")) c.rho_grid = file.at("rho_grid").as_vector();
  if (file.contains("sigma_grid")) c.sigma_grid = file.at("sigma_grid").as_vector();
  c.rho_demo = file.number_or("rho_demo", c.rho_demo);
  c.horizon = file.integer_or("horizon", c.horizon);
  c.T = file.integer_or("T", c.T);
  c.T_h = file.integer_or("T_h", c.T_h);
  c.T_ini = file.integer_or("T_ini", c.T_ini);
  c.excitation_std = file.number_or("excitation_std", c.excitation_std);
  c.n_calibration_realizations =
      static_cast<int>(file.integer_or("n_calibration_realizations", c.n_calibration_realizations));
  c.percentile = file.number_or("percentile", c.percentile);
  c.n_sweep_seeds = static_cast<int>(file.integer_or("n_sweep_seeds", c.n_sweep_seeds));
  c.alpha = file.number_or("alpha", c.alpha);
  c.master_seed = static_cast<std::uint64_t>(file.integer_or("master_seed", c.master_seed));
  c.workers = static_cast<int>(file.integer_or("workers", c.workers));
  c.output_path = file.string_or("output_path", c.output_path);
  c.robust.golden_tol = file.number_or("golden_tol", c.robust.golden_tol);
  c.robust.gamma_margin = file.number_or("gamma_margin", c.robust.gamma_margin);
  c.robust.inner_tol = file.number_or("inner_tol", c.robust.inner_tol);
  c.robust.pg_tol = file.number_or("pg_tol", c.robust.pg_tol);
  c.robust.max_iter = static_cast<int>(file.integer_or("max_iter", c.robust.max_iter));
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path,
                                             const std::vector<std::string>& overrides) {
  ConfigFile file = ConfigFile::parse_file(path);
  for (const auto& o : overrides) file.apply_override(o);
  return from_config(file);
}

void ExperimentConfig::validate() const {
  const Index n = A_template.rows(), m = B.cols(), p = C.rows();
  if (A_template.rows() != A_template.cols() || B.rows() != n || C.cols() != n)
    throw std::invalid_argument("config: plant matrices have inconsistent dimensions");
  if (x0.size() != n) throw std::invalid_argument("config: x0 size != n");
  if (horizon < 1 || T_ini < 1) throw std::invalid_argument("config: horizon and T_ini must be >= 1");
  if (rho_grid.empty() || sigma_grid.empty())
    throw std::invalid_argument("config: rho_grid and sigma_grid must be nonempty");
  for (double s : sigma_grid)
    if (s < 0) throw std::invalid_argument("config: sigma must be >= 0");
  for (double r : rho_grid)
    if (r <= 0) throw std::invalid_argument("config: rho must be > 0");
  if (T < (m + 1) * (n + T_ini + horizon) - 1)
    throw std::invalid_argument(
        "config: T too short for persistency of excitation of order n + T_ini + N");
  if (T_h <= T + T_ini)
    throw std::invalid_argument("config: need T_h > T + T_ini (historical precedes recent data)");
  if (percentile <= 0 || percentile > 100)
    throw std::invalid_argument("config: percentile must be in (0, 100]");
  if (n_calibration_realizations < 1 || n_sweep_seeds < 1)
    throw std::invalid_argument("config: realization counts must be >= 1");
  (void)p;
}

StateSpacePlant ExperimentConfig::plant_for(double rho) const {
  return StateSpacePlant(rho * A_template, B, C, x0);
}

DataGenConfig ExperimentConfig::data_gen(double sigma) const {
  DataGenConfig d;
  d.T = T;
  d.T_h = T_h;
  d.T_ini = T_ini;
  d.horizon = horizon;
  d.sigma = sigma;
  d.excitation_std = excitation_std;
  return d;
}

NoiselessDemoReport run_noiseless_demo(const ExperimentConfig& config) {
  config.validate();
  const double t0 = now_ms();
  const StateSpacePlant plant = config.plant_for(config.rho_demo);
  const Index N = config.horizon, m = plant.m(), p = plant.p();
  const CostWeights weights = CostWeights::identity(p, m, N);
  const NoiseModel noise = NoiseModel::identity(p, m);

  NoiselessDemoReport report;
  report.model_result =
      solve_nominal(build_toeplitz(impulse_response(plant, N)), free_response(plant, N), weights,
                    noise);
  report.model_result.model = "exact";

  const GeneratedData data = generate_data_library(
      plant, config.data_gen(0.0), derive_seed(config.master_seed, seed_tag("noiseless-demo")));
  const auto pe = is_persistently_exciting(data.library.historical.u, m,
                                           plant.n() + config.T_ini + N);
  report.pe_rank = pe.rank;
  report.pe_required = pe.required;
  if (!pe.excited)
    throw std::runtime_error("noiseless-demo: historical input is not persistently exciting of "
                             "order n + T_ini + N");

  const HankelSplit split = split_hankels(data.library, config.T_ini, N);
  const BehavioralSolution sol = solve_behavioral_system(split, data.library.recent);
  BehavioralModel model;
  model.G_hat_col = BlockColumn(split.Y_f * sol.G, p);
  model.G_hat_col.set_block(0, Matrix::Zero(p, m));
  model.y_free_hat = split.Y_f * sol.g;
  model.provenance = BehavioralModel::Provenance::exact;

  report.data_result = solve_nominal(model.toeplitz(), model.y_free_hat, weights, noise);
  report.data_result.model = "behavioral";

  report.J_model = report.model_result.cost;
  report.J_data = report.data_result.cost;
  report.relative_cost_diff = std::abs(report.J_model - report.J_data) / report.J_model;
  report.controller_diff = (report.model_result.K - report.data_result.K).norm();
  report.runtime_ms = now_ms() - t0;
  return report;
}

namespace {

struct RhoContext {
  StateSpacePlant plant;
  Matrix G;
  Vector y_free;
  double J_star_sq = 0.0;
  ClosedLoopMaps star_maps;
};

SweepRecord run_cell(const ExperimentConfig& config, const RhoContext& ctx, double rho,
                     double sigma, double epsilon, int seed_index) {
  const double t0 = now_ms();
  SweepRecord rec;
  rec.rho = rho;
  rec.sigma = sigma;
  rec.epsilon = epsilon;
  rec.seed = derive_seed(config.master_seed, seed_tag("sweep-cell"), double_bits(rho),
                         double_bits(sigma), static_cast<std::uint64_t>(seed_index));
  try {
    const Index N = config.horizon, m = ctx.plant.m(), p = ctx.plant.p();
    const CostWeights weights = CostWeights::identity(p, m, N);
    const NoiseModel unit_noise = NoiseModel::identity(p, m);

    const GeneratedData data =
        generate_data_library(ctx.plant, config.data_gen(sigma), rec.seed);
    const HankelSplit split = split_hankels(data.library, config.T_ini, N);
    BehavioralModel model = least_squares_model(split, data.library.recent);
    model.epsilon = epsilon;

    RobustConfig rcfg = config.robust;
    rcfg.epsilon = epsilon;
    rcfg.alpha = config.alpha;
    const RobustSolution robust = golden_search(model, rcfg);

    const ClosedLoopMaps true_maps =
        maps_from_controller(ctx.G, robust.K_hat, N, m, p);
    const double J_hat_sq = cost_closed_form(ctx.G, ctx.y_free, true_maps, weights, unit_noise);

    rec.J_star = std::sqrt(ctx.J_star_sq);
    rec.J_hat = std::sqrt(J_hat_sq);
    rec.gap = (J_hat_sq - ctx.J_star_sq) / ctx.J_star_sq;
    rec.gamma_star = robust.gamma_star;

    const SuboptimalityBound bound = suboptimality_bound(
        ctx.star_maps, epsilon, robust.alpha, ctx.G, ctx.y_free, model.toeplitz(),
        model.y_free_hat);
    rec.bound = bound.value;
    const double delta_norm = spectral_norm(model.toeplitz() - ctx.G);
    const double delta0_norm = (model.y_free_hat - ctx.y_free).norm();
    rec.bound_valid =
        bound.hypotheses_ok && delta_norm <= epsilon && delta0_norm <= epsilon && epsilon > 0;
    rec.status = robust.all_converged ? "ok" : "ok-inner-not-converged";
  } catch (const std::exception& e) {
    rec.status = std::string("error: ") + e.what();
    rec.J_star = rec.J_hat = rec.gap = rec.bound = rec.gamma_star =
        std::numeric_limits<double>::quiet_NaN();
  }
  rec.runtime_ms = now_ms() - t0;
  return rec;
}

}  // namespace

std::vector<CalibrationRecord> run_epsilon_calibration(const ExperimentConfig& config) {
  config.validate();
  std::vector<CalibrationRecord> cals(config.rho_grid.size() * config.sigma_grid.size());
  run_parallel(static_cast<Index>(cals.size()), config.workers, [&](Index i) {
    const double rho = config.rho_grid[i / config.sigma_grid.size()];
    const double sigma = config.sigma_grid[i % config.sigma_grid.size()];
    const StateSpacePlant plant = config.plant_for(rho);
    const auto cal = calibrate_epsilon(
        plant, config.data_gen(sigma), config.n_calibration_realizations, config.percentile,
        derive_seed(config.master_seed, seed_tag("calibration"), double_bits(rho),
                    double_bits(sigma)));
    cals[i] = {rho, sigma, cal.epsilon};
  });
  return cals;
}

std::vector<SweepRecord> run_robust_sweep(const ExperimentConfig& config) {
  config.validate();
  const auto cals = run_epsilon_calibration(config);

  std::vector<RhoContext> contexts(config.rho_grid.size());
  run_parallel(static_cast<Index>(contexts.size()), config.workers, [&](Index i) {
    RhoContext ctx;
    ctx.plant = config.plant_for(config.rho_grid[i]);
    ctx.G = build_toeplitz(impulse_response(ctx.plant, config.horizon));
    ctx.y_free = free_response(ctx.plant, config.horizon);
    const SynthesisResult star =
        solve_nominal(ctx.G, ctx.y_free,
                      CostWeights::identity(ctx.plant.p(), ctx.plant.m(), config.horizon),
                      NoiseModel::identity(ctx.plant.p(), ctx.plant.m()));
    ctx.J_star_sq = star.cost_sq;
    ctx.star_maps = star.maps;
    contexts[i] = std::move(ctx);
  });

  const Index n_sigma = static_cast<Index>(config.sigma_grid.size());
  const Index n_seeds = config.n_sweep_seeds;
  const Index n_cells = static_cast<Index>(config.rho_grid.size()) * n_sigma * n_seeds;
  std::vector<SweepRecord> records(n_cells);
  run_parallel(n_cells, config.workers, [&](Index i) {
    const Index ri = i / (n_sigma * n_seeds);
    const Index si = (i / n_seeds) % n_sigma;
    const int seed_index = static_cast<int>(i % n_seeds);
    const double sigma = config.sigma_grid[si];
    const double epsilon = cals[ri * n_sigma + si].epsilon;
    records[i] =
        run_cell(config, contexts[ri], config.rho_grid[ri], sigma, epsilon, seed_index);
  });
  return records;
}

namespace {

std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

constexpr const char* kCsvHeader =
    "rho,sigma,epsilon,J_star,J_hat,gap,bound,gamma_star,runtime_ms,seed,bound_valid,status";

}  // namespace

void emit_csv(const std::vector<SweepRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_csv: cannot open " + path);
  out << kCsvHeader << "\n";
  for (const auto& r : records) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << fmt12(r.rho) << ',' << fmt12(r.sigma) << ',' << fmt12(r.epsilon) << ','
        << fmt12(r.J_star) << ',' << fmt12(r.J_hat) << ',' << fmt12(r.gap) << ','
        << fmt12(r.bound) << ',' << fmt12(r.gamma_star) << ',' << fmt12(r.runtime_ms) << ','
        << r.seed << ',' << (r.bound_valid ? 1 : 0) << ',' << status << "\n";
  }
}

std::vector<SweepRecord> parse_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_sweep_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("parse_sweep_csv: empty file");
  if (line != kCsvHeader) throw std::runtime_error("parse_sweep_csv: unexpected header");
  std::vector<SweepRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12) throw std::runtime_error("parse_sweep_csv: wrong column count");
    SweepRecord r;
    r.rho = std::stod(cells[0]);
    r.sigma = std::stod(cells[1]);
    r.epsilon = std::stod(cells[2]);
    r.J_star = std::stod(cells[3]);
    r.J_hat = std::stod(cells[4]);
    r.gap = std::stod(cells[5]);
    r.bound = std::stod(cells[6]);
    r.gamma_star = std::stod(cells[7]);
    r.runtime_ms = std::stod(cells[8]);
    r.seed = std::stoull(cells[9]);
    r.bound_valid = cells[10] == "1";
    r.status = cells[11];
    out.push_back(std::move(r));
  }
  return out;
}

void write_sweep_metadata(const ExperimentConfig& config,
                          const std::vector<CalibrationRecord>& calibrations,
                          const std::string& csv_path) {
  nlohmann::json j;
  j["master_seed"] = config.master_seed;
  j["percentile"] = config.percentile;
  j["n_calibration_realizations"] = config.n_calibration_realizations;
  j["n_sweep_seeds"] = config.n_sweep_seeds;
  j["rho_grid"] = config.rho_grid;
  j["sigma_grid"] = config.sigma_grid;
  j["alpha"] = config.alpha;
  j["horizon"] = config.horizon;
  j["T"] = config.T;
  j["T_h"] = config.T_h;
  j["T_ini"] = config.T_ini;
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& c : calibrations)
    eps.push_back({{"rho", c.rho}, {"sigma", c.sigma}, {"epsilon", c.epsilon}});
  j["epsilons"] = eps;
  std::ofstream out(csv_path + ".meta.json");
  if (!out) throw std::runtime_error("write_sweep_metadata: cannot open " + csv_path + ".meta.json");
  out << j.dump(2) << "\n";
}

}  // namespace datalqg
