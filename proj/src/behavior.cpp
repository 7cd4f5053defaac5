#include "datalqg/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "datalqg/rng.hpp"

namespace datalqg {

void DataLibrary::check_dimensions() const {
  historical.check_dimensions();
  recent.check_dimensions();
  if (historical.input_dim != recent.input_dim || historical.output_dim != recent.output_dim)
    throw std::invalid_argument("DataLibrary: historical/recent sample dimensions differ");
}

PersistencyResult is_persistently_exciting(const Vector& u, Index input_dim, Index order,
                                           double tol) {
  const HankelMatrix h = build_hankel(u, input_dim, order);
  PersistencyResult r;
  r.required = input_dim * order;
  r.rank = matrix_rank(h.data, tol);
  r.excited = (r.rank == r.required);
  return r;
}

HankelSplit split_hankels(const DataLibrary& data, Index T_ini, Index horizon) {
  data.check_dimensions();
  if (T_ini < 1 || horizon < 1) throw std::invalid_argument("split_hankels: T_ini, N must be >= 1");
  const Index depth = T_ini + horizon;
  if (data.historical.length < depth)
    throw std::invalid_argument("split_hankels: horizon too long for the historical data");
  const Index m = data.input_dim(), p = data.output_dim();
  const Matrix Hu = build_hankel(data.historical.u, m, depth).data;
  const Matrix Hy = build_hankel(data.historical.y, p, depth).data;
  HankelSplit s;
  s.T_ini = T_ini;
  s.horizon = horizon;
  s.width = Hu.cols();
  s.U_p = Hu.topRows(m * T_ini);
  s.U_f = Hu.bottomRows(m * horizon);
  s.Y_p = Hy.topRows(p * T_ini);
  s.Y_f = Hy.bottomRows(p * horizon);
  return s;
}

namespace {

// Left-hand matrix and right-hand sides of the behavioral linear system.
struct StackedSystem {
  Matrix lhs;    // (m*T_ini + p*T_ini + m*N) x W
  Matrix rhs_G;  // same rows x m
  Vector rhs_g;
};

StackedSystem stack_system(const HankelSplit& split, const Trajectory& recent) {
  const Index m = split.U_p.rows() / split.T_ini;
  const Index p = split.Y_p.rows() / split.T_ini;
  if (recent.length != split.T_ini || recent.input_dim != m || recent.output_dim != p)
    throw std::invalid_argument("behavioral system: recent trajectory does not match the split");
  StackedSystem s;
  const Index rows = split.U_p.rows() + split.Y_p.rows() + split.U_f.rows();
  s.lhs.resize(rows, split.width);
  s.lhs << split.U_p, split.Y_p, split.U_f;
  s.rhs_G = Matrix::Zero(rows, m);
  s.rhs_G.block(split.U_p.rows() + split.Y_p.rows(), 0, m, m) = Matrix::Identity(m, m);
  s.rhs_g.resize(rows);
  s.rhs_g << recent.u, recent.y, Vector::Zero(split.U_f.rows());
  return s;
}

}  // namespace

BehavioralSolution solve_behavioral_system(const HankelSplit& split, const Trajectory& recent,
                                           bool require_consistent, double tol) {
  const StackedSystem sys = stack_system(split, recent);
  if (sys.lhs.norm() == 0.0) throw std::invalid_argument("behavioral system: all-zero Hankel data");
  const Matrix pinv = pseudoinverse(sys.lhs);
  BehavioralSolution sol;
  sol.G = pinv * sys.rhs_G;
  sol.g = pinv * sys.rhs_g;
  const double scale = 1.0 + std::max(sys.rhs_G.norm(), sys.rhs_g.norm());
  sol.residual = std::sqrt((sys.lhs * sol.G - sys.rhs_G).squaredNorm() +
                           (sys.lhs * sol.g - sys.rhs_g).squaredNorm()) /
                 scale;
  if (require_consistent && sol.residual > tol)
    throw std::runtime_error(
        "solve_behavioral_system: residual " + std::to_string(sol.residual) +
        " exceeds tolerance; data are noisy or not persistently exciting enough");
  return sol;
}

BehavioralModel least_squares_model(const HankelSplit& split, const Trajectory& recent) {
  const BehavioralSolution sol = solve_behavioral_system(split, recent, false);
  const Index p = split.Y_f.rows() / split.horizon;
  BehavioralModel model;
  model.G_hat_col = BlockColumn(split.Y_f * sol.G, p);
  // strict causality repair: the h_0 block of a noisy estimate is spurious
  model.G_hat_col.set_block(0, Matrix::Zero(p, split.U_f.rows() / split.horizon));
  model.y_free_hat = split.Y_f * sol.g;
  model.epsilon = 0.0;
  model.provenance = BehavioralModel::Provenance::least_squares;
  return model;
}

GeneratedData generate_data_library(const StateSpacePlant& plant, const DataGenConfig& cfg,
                                    std::uint64_t seed) {
  const Index n = plant.n(), m = plant.m(), p = plant.p();
  if (cfg.T_h <= cfg.T + cfg.T_ini)
    throw std::invalid_argument("generate_data_library: need T_h > T + T_ini");
  if (cfg.T < 1 || cfg.T_ini < 1 || cfg.sigma < 0 || cfg.excitation_std < 0)
    throw std::invalid_argument("generate_data_library: invalid configuration");

  // steering window: long enough for a full-rank reachability map and to keep
  // the minimum-norm correction at ordinary input magnitudes, but clear of
  // the historical samples when possible
  Index window = std::min<Index>(std::max<Index>(2 * n, 2), cfg.T_h);
  if (cfg.T_h - cfg.T >= std::max<Index>(2 * n, 2)) window = std::min(window, cfg.T_h - cfg.T);
  Matrix reach(n, window * m);  // [A^{W-1}B, ..., AB, B]
  {
    Matrix Aj = Matrix::Identity(n, n);
    for (Index j = window; j-- > 0;) {
      reach.middleCols(j * m, m) = Aj * plant.B;
      Aj = plant.A * Aj;
    }
  }
  if (matrix_rank(reach) != n)
    throw std::runtime_error("generate_data_library: plant is not controllable, cannot steer the "
                             "run to the requested initial state");

  Rng rng(seed);
  Matrix u_cmd(m, cfg.T_h), w(m, cfg.T_h), v(p, cfg.T_h);
  for (Index t = 0; t < cfg.T_h; ++t) {
    u_cmd.col(t) = cfg.excitation_std * rng.gaussian_vector(m);
    w.col(t) = cfg.sigma * rng.gaussian_vector(m);
    v.col(t) = cfg.sigma * rng.gaussian_vector(p);
  }

  Matrix ys(p, cfg.T_h);
  Vector x = Vector::Zero(n);
  for (Index t = 0; t < cfg.T_h - window; ++t) {
    ys.col(t) = plant.C * x + v.col(t);
    x = plant.A * x + plant.B * (u_cmd.col(t) + w.col(t));
  }
  // minimum-norm additive correction on the commanded inputs of the window so
  // that x(0) = plant.x0 exactly, given the realized input noise
  Vector x_free = x;
  for (Index j = 0; j < window; ++j)
    x_free = plant.A * x_free + plant.B * (u_cmd.col(cfg.T_h - window + j) + w.col(cfg.T_h - window + j));
  const Vector target = plant.x0 - x_free;
  const Vector du = pseudoinverse(reach) * target;
  if ((reach * du - target).norm() > 1e-8 * (1.0 + target.norm()))
    throw std::runtime_error("generate_data_library: steering solve failed");
  for (Index j = 0; j < window; ++j) {
    const Index t = cfg.T_h - window + j;
    u_cmd.col(t) += du.segment(j * m, m);
    ys.col(t) = plant.C * x + v.col(t);
    x = plant.A * x + plant.B * (u_cmd.col(t) + w.col(t));
  }

  auto slice = [&](Index begin, Index len, long start_index) {
    Trajectory tr;
    tr.length = len;
    tr.input_dim = m;
    tr.output_dim = p;
    tr.start_index = start_index;
    tr.u.resize(m * len);
    tr.y.resize(p * len);
    for (Index t = 0; t < len; ++t) {
      tr.u.segment(t * m, m) = u_cmd.col(begin + t);
      tr.y.segment(t * p, p) = ys.col(begin + t);
    }
    return tr;
  };

  GeneratedData out;
  out.library.historical = slice(0, cfg.T, -static_cast<long>(cfg.T_h));
  out.library.recent = slice(cfg.T_h - cfg.T_ini, cfg.T_ini, -static_cast<long>(cfg.T_ini));
  out.x0_true = x;
  return out;
}

EpsilonCalibration calibrate_epsilon(const StateSpacePlant& plant, const DataGenConfig& cfg,
                                     Index n_realizations, double percentile, std::uint64_t seed) {
  if (n_realizations < 1) throw std::invalid_argument("calibrate_epsilon: n_realizations >= 1");
  if (percentile <= 0.0 || percentile > 100.0)
    throw std::invalid_argument("calibrate_epsilon: percentile must be in (0, 100]");
  const Matrix G_true = build_toeplitz(impulse_response(plant, cfg.horizon));
  const Vector yf_true = free_response(plant, cfg.horizon);

  EpsilonCalibration cal;
  cal.percentile = percentile;
  cal.samples.resize(n_realizations);
  for (Index r = 0; r < n_realizations; ++r) {
    const GeneratedData data =
        generate_data_library(plant, cfg, derive_seed(seed, seed_tag("calibration"), r));
    const HankelSplit split = split_hankels(data.library, cfg.T_ini, cfg.horizon);
    const BehavioralModel model = least_squares_model(split, data.library.recent);
    cal.samples[r] = std::max(spectral_norm(model.toeplitz() - G_true),
                              (model.y_free_hat - yf_true).norm());
  }
  std::vector<double> sorted = cal.samples;
  std::sort(sorted.begin(), sorted.end());
  // nearest-rank percentile: monotone in the requested percentile, max at 100
  const auto idx = static_cast<Index>(
      std::ceil(percentile / 100.0 * static_cast<double>(n_realizations))) - 1;
  cal.epsilon = sorted[std::clamp<Index>(idx, 0, n_realizations - 1)];
  return cal;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  traj.check_dimensions();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trajectory_csv: cannot open " + path);
  out << "t";
  for (Index i = 0; i < traj.input_dim; ++i) out << ",u" << i;
  for (Index i = 0; i < traj.output_dim; ++i) out << ",y" << i;
  out << "\n";
  char buf[32];
  for (Index t = 0; t < traj.length; ++t) {
    out << (traj.start_index + t);
    for (Index i = 0; i < traj.input_dim; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", traj.u(t * traj.input_dim + i));
      out << ',' << buf;
    }
    for (Index i = 0; i < traj.output_dim; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", traj.y(t * traj.output_dim + i));
      out << ',' << buf;
    }
    out << "\n";
  }
}

Trajectory read_trajectory_csv(const std::string& path, Index input_dim, Index output_dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_trajectory_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_trajectory_csv: empty file");
  std::vector<double> us, ys;
  long start_index = 0;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<Index>(row.size()) != 1 + input_dim + output_dim)
      throw std::runtime_error("read_trajectory_csv: wrong column count in " + path);
    if (first) {
      start_index = static_cast<long>(row[0]);
      first = false;
    }
    for (Index i = 0; i < input_dim; ++i) us.push_back(row[1 + i]);
    for (Index i = 0; i < output_dim; ++i) ys.push_back(row[1 + input_dim + i]);
  }
  Trajectory tr;
  tr.input_dim = input_dim;
  tr.output_dim = output_dim;
  tr.length = static_cast<Index>(us.size()) / input_dim;
  tr.start_index = start_index;
  tr.u = Eigen::Map<Vector>(us.data(), static_cast<Index>(us.size()));
  tr.y = Eigen::Map<Vector>(ys.data(), static_cast<Index>(ys.size()));
  tr.check_dimensions();
  return tr;
}

}  // namespace datalqg
