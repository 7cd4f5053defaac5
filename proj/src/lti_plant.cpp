#include "datalqg/lti_plant.hpp"

#include <Eigen/Eigenvalues>
#include <iostream>
#include <stdexcept>

#include "datalqg/rng.hpp"

namespace datalqg {

namespace {

Matrix psd_sqrt(const Matrix& s, const char* what) {
  if (s.rows() != s.cols()) throw std::invalid_argument(std::string(what) + ": must be square");
  if ((s - s.transpose()).norm() > 1e-10 * (1.0 + s.norm()))
    throw std::invalid_argument(std::string(what) + ": must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  Vector ev = es.eigenvalues();
  const double floor = -1e-10 * (1.0 + std::abs(ev.maxCoeff()));
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < floor) throw std::invalid_argument(std::string(what) + ": must be PSD");
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

StateSpacePlant::StateSpacePlant(Matrix A_, Matrix B_, Matrix C_, Vector x0_)
    : A(std::move(A_)), B(std::move(B_)), C(std::move(C_)), x0(std::move(x0_)) {
  if (A.rows() != A.cols()) throw std::invalid_argument("StateSpacePlant: A must be square");
  if (B.rows() != A.rows()) throw std::invalid_argument("StateSpacePlant: B row count != n");
  if (C.cols() != A.rows()) throw std::invalid_argument("StateSpacePlant: C col count != n");
  if (x0.size() != A.rows()) throw std::invalid_argument("StateSpacePlant: x0 size != n");
  if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !x0.allFinite())
    throw std::invalid_argument("StateSpacePlant: non-finite entries");
}

bool StateSpacePlant::is_controllable(double tol) const {
  Matrix ctrb(n(), n() * m());
  Matrix Ak = Matrix::Identity(n(), n());
  for (Index k = 0; k < n(); ++k) {
    ctrb.middleCols(k * m(), m()) = Ak * B;
    Ak = A * Ak;
  }
  return matrix_rank(ctrb, tol) == n();
}

bool StateSpacePlant::is_observable(double tol) const {
  Matrix obsv(n() * p(), n());
  Matrix Ak = Matrix::Identity(n(), n());
  for (Index k = 0; k < n(); ++k) {
    obsv.middleRows(k * p(), p()) = C * Ak;
    Ak = A * Ak;
  }
  return matrix_rank(obsv, tol) == n();
}

std::optional<Index> StateSpacePlant::observability_lag(double tol) const {
  Matrix obsv(n() * p(), n());
  Matrix Ak = Matrix::Identity(n(), n());
  for (Index l = 1; l <= n(); ++l) {
    obsv.middleRows((l - 1) * p(), p()) = C * Ak;
    Ak = A * Ak;
    if (matrix_rank(obsv.topRows(l * p()), tol) == n()) return l;
  }
  return std::nullopt;
}

NoiseModel::NoiseModel(Matrix sigma_v_, Matrix sigma_w_)
    : sigma_v(std::move(sigma_v_)), sigma_w(std::move(sigma_w_)) {
  sqrt_v = psd_sqrt(sigma_v, "NoiseModel Sigma_v");
  sqrt_w = psd_sqrt(sigma_w, "NoiseModel Sigma_w");
}

NoiseModel NoiseModel::identity(Index p, Index m) {
  return NoiseModel(Matrix::Identity(p, p), Matrix::Identity(m, m));
}

NoiseModel NoiseModel::scaled_identity(Index p, Index m, double sigma) {
  if (sigma < 0) throw std::invalid_argument("NoiseModel: sigma must be >= 0");
  return NoiseModel(sigma * sigma * Matrix::Identity(p, p),
                    sigma * sigma * Matrix::Identity(m, m));
}

bool NoiseModel::is_identity(double tol) const {
  return (sigma_v - Matrix::Identity(sigma_v.rows(), sigma_v.cols())).norm() <= tol &&
         (sigma_w - Matrix::Identity(sigma_w.rows(), sigma_w.cols())).norm() <= tol;
}

CostWeights::CostWeights(std::vector<Matrix> L_, std::vector<Matrix> R_)
    : L(std::move(L_)), R(std::move(R_)) {
  if (L.empty() || L.size() != R.size())
    throw std::invalid_argument("CostWeights: need equally many L_t and R_t, at least one");
  horizon = static_cast<Index>(L.size());
  const Index p = L.front().rows(), m = R.front().rows();
  std::vector<Matrix> l_half(horizon), r_half(horizon);
  for (Index t = 0; t < horizon; ++t) {
    if (L[t].rows() != p || L[t].cols() != p || R[t].rows() != m || R[t].cols() != m)
      throw std::invalid_argument("CostWeights: inconsistent block dimensions");
    l_half[t] = psd_sqrt(L[t], "CostWeights L_t");
    r_half[t] = psd_sqrt(R[t], "CostWeights R_t");
    Eigen::SelfAdjointEigenSolver<Matrix> es(R[t]);
    if (t + 1 < horizon && es.eigenvalues().minCoeff() <= 0)
      throw std::invalid_argument("CostWeights: R_t must be positive definite");
  }
  l_sqrt_ = Matrix::Zero(p * horizon, p * horizon);
  for (Index t = 0; t < horizon; ++t) l_sqrt_.block(t * p, t * p, p, p) = l_half[t];
  // input cost runs through t = N-2 (see struct comment)
  const Index rows = m * std::max<Index>(horizon - 1, 0);
  r_sqrt_ = Matrix::Zero(rows, m * horizon);
  for (Index t = 0; t + 1 < horizon; ++t) r_sqrt_.block(t * m, t * m, m, m) = r_half[t];
}

CostWeights CostWeights::identity(Index p, Index m, Index horizon) {
  if (horizon < 1) throw std::invalid_argument("CostWeights: horizon must be >= 1");
  return CostWeights(std::vector<Matrix>(horizon, Matrix::Identity(p, p)),
                     std::vector<Matrix>(horizon, Matrix::Identity(m, m)));
}

bool CostWeights::is_identity(double tol) const {
  for (const auto& l : L)
    if ((l - Matrix::Identity(l.rows(), l.cols())).norm() > tol) return false;
  for (const auto& r : R)
    if ((r - Matrix::Identity(r.rows(), r.cols())).norm() > tol) return false;
  return true;
}

void Trajectory::check_dimensions() const {
  if (input_dim <= 0 || output_dim <= 0 || length < 0)
    throw std::invalid_argument("Trajectory: invalid dimensions");
  if (u.size() != input_dim * length || y.size() != output_dim * length)
    throw std::invalid_argument("Trajectory: stacked lengths inconsistent with (dims, length)");
}

namespace {

SimulationResult simulate_impl(const StateSpacePlant& plant, const NoiseModel& noise,
                               const Matrix* K, const Vector* u_ext, Index horizon,
                               std::uint64_t seed) {
  const Index n = plant.n(), m = plant.m(), p = plant.p();
  if (horizon < 1) throw std::invalid_argument("simulate: horizon must be >= 1");
  if (noise.sigma_v.rows() != p || noise.sigma_w.rows() != m)
    throw std::invalid_argument("simulate: noise dimensions do not match plant");
  if (K) {
    if (K->rows() != m * horizon || K->cols() != p * horizon)
      throw std::invalid_argument("simulate: controller dimensions do not match");
    if (mask_violation(*K, causal_mask(horizon, m, p)) > 0)
      throw std::invalid_argument("simulate: controller is not causal");
  }
  if (u_ext && u_ext->size() != m * horizon)
    throw std::invalid_argument("simulate: external input length mismatch");

  Rng rng(seed);
  SimulationResult out;
  out.v.resize(p * horizon);
  out.w.resize(m * horizon);
  Vector ys = Vector::Zero(p * horizon);
  Vector us = Vector::Zero(m * horizon);
  Vector x = plant.x0;
  for (Index t = 0; t < horizon; ++t) {
    out.v.segment(t * p, p) = noise.sqrt_v * rng.gaussian_vector(p);
    out.w.segment(t * m, m) = noise.sqrt_w * rng.gaussian_vector(m);
    ys.segment(t * p, p) = plant.C * x + out.v.segment(t * p, p);
    Vector u = out.w.segment(t * m, m);
    if (K) u += K->block(t * m, 0, m, (t + 1) * p) * ys.head((t + 1) * p);
    if (u_ext) u += u_ext->segment(t * m, m);
    us.segment(t * m, m) = u;
    x = plant.A * x + plant.B * u;
  }
  out.trajectory = Trajectory{us, ys, horizon, m, p, 0};
  out.x_end = x;
  return out;
}

}  // namespace

SimulationResult simulate_closed_loop(const StateSpacePlant& plant, const NoiseModel& noise,
                                      const Matrix& K, Index horizon, std::uint64_t seed) {
  return simulate_impl(plant, noise, &K, nullptr, horizon, seed);
}

SimulationResult simulate_open_loop(const StateSpacePlant& plant, const NoiseModel& noise,
                                    const Vector& u_ext, std::uint64_t seed) {
  if (plant.m() <= 0 || u_ext.size() % plant.m() != 0)
    throw std::invalid_argument("simulate_open_loop: input length not a multiple of m");
  return simulate_impl(plant, noise, nullptr, &u_ext, u_ext.size() / plant.m(), seed);
}

BlockColumn impulse_response(const StateSpacePlant& plant, Index horizon) {
  if (horizon < 1) throw std::invalid_argument("impulse_response: horizon must be >= 1");
  BlockColumn col = BlockColumn::zeros(horizon, plant.p(), plant.m());
  Matrix Ak = Matrix::Identity(plant.n(), plant.n());
  for (Index k = 1; k < horizon; ++k) {
    col.set_block(k, plant.C * Ak * plant.B);
    Ak = plant.A * Ak;
  }
  return col;
}

Vector free_response(const StateSpacePlant& plant, Index horizon) {
  if (horizon < 1) throw std::invalid_argument("free_response: horizon must be >= 1");
  Vector out(plant.p() * horizon);
  Vector x = plant.x0;
  for (Index t = 0; t < horizon; ++t) {
    out.segment(t * plant.p(), plant.p()) = plant.C * x;
    x = plant.A * x;
  }
  return out;
}

double cost_closed_form(const Matrix& G, const Vector& y_free, const ClosedLoopMaps& maps,
                        const CostWeights& weights, const NoiseModel& noise) {
  maps.check_dimensions();
  const Index N = maps.horizon, m = maps.input_dim, p = maps.output_dim;
  if (weights.horizon != N || weights.p() != p || weights.m() != m)
    throw std::invalid_argument("cost_closed_form: weights do not match maps");
  if (G.rows() != p * N || G.cols() != m * N || y_free.size() != p * N)
    throw std::invalid_argument("cost_closed_form: G / y_free dimensions do not match maps");
  if (noise.sigma_v.rows() != p || noise.sigma_w.rows() != m)
    throw std::invalid_argument("cost_closed_form: noise dimensions do not match maps");

  // achievability sanity (Eqs. of the affine subspace); warn, don't fail
  const double res = std::max((maps.yy - G * maps.uy - Matrix::Identity(p * N, p * N)).norm(),
                              (maps.yu - G * maps.uu).norm());
  if (res > 1e-6 * (1.0 + G.norm()))
    std::cerr << "cost_closed_form: maps are not achievable for the given G (residual " << res
              << ")\n";

  Matrix sv = Matrix::Zero(p * N, p * N);
  Matrix sw = Matrix::Zero(m * N, m * N);
  for (Index t = 0; t < N; ++t) {
    sv.block(t * p, t * p, p, p) = noise.sqrt_v;
    sw.block(t * m, t * m, m, m) = noise.sqrt_w;
  }
  const Matrix& lh = weights.output_weight_sqrt();
  const Matrix& rh = weights.input_weight_sqrt();

  const Matrix ly = lh * maps.yy;
  const Matrix ru = rh * maps.uy;
  double j2 = (ly * sv).squaredNorm() + (lh * maps.yu * sw).squaredNorm() +
              (ly * y_free).squaredNorm() + (ru * sv).squaredNorm() +
              (rh * maps.uu * sw).squaredNorm() + (ru * y_free).squaredNorm();
  return j2;
}

CostEstimate cost_monte_carlo(const StateSpacePlant& plant, const Matrix& K,
                              const CostWeights& weights, const NoiseModel& noise, Index n_trials,
                              std::uint64_t seed) {
  if (n_trials < 1) throw std::invalid_argument("cost_monte_carlo: n_trials must be >= 1");
  const Index N = weights.horizon;
  double sum = 0.0, sumsq = 0.0;
  for (Index trial = 0; trial < n_trials; ++trial) {
    const auto sim = simulate_closed_loop(plant, noise, K, N, derive_seed(seed, trial));
    double c = 0.0;
    for (Index t = 0; t < N; ++t) {
      const Vector yt = sim.trajectory.sample_y(t);
      c += yt.dot(weights.L[t] * yt);
      if (t + 1 < N) {
        const Vector ut = sim.trajectory.sample_u(t);
        c += ut.dot(weights.R[t] * ut);
      }
    }
    sum += c;
    sumsq += c * c;
  }
  CostEstimate est;
  est.n_trials = n_trials;
  est.mean = sum / static_cast<double>(n_trials);
  if (n_trials > 1) {
    const double var = (sumsq - sum * sum / n_trials) / static_cast<double>(n_trials - 1);
    est.stderr_ = std::sqrt(std::max(var, 0.0) / static_cast<double>(n_trials));
  }
  return est;
}

}  // namespace datalqg
