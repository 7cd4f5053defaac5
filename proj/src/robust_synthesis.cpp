#include "datalqg/robust_synthesis.hpp"

#include <Eigen/LU>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "masked_least_squares.hpp"

namespace datalqg {

double h_bound(double eps, double b, double y_norm) {
  if (eps < 0 || b < 0 || y_norm < 0)
    throw std::invalid_argument("h_bound: arguments must be nonnegative");
  const double t = 2.0 + b * y_norm;
  return eps * eps * t * t + 2.0 * eps * y_norm * t;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct InnerProblem {
  std::vector<detail::QuadTerm> terms;
  detail::MaskedPattern pattern;
  Index N, m, p;
  double constant_m;  // term-5 identity floor excluded from J_inner
};

// Inner objective F(X) with weights a1 = 1 + hG + hy on the yy-channel and
// a2 = 1 + hy on the uy-channel (identity cost weights, terminal Phi_uy block
// row pinned):
//   F = a1||I+GX||^2 + ||(I+GX)G||^2 + ||(I+GX)y||^2
//       + a2||X||^2 + ||I+XG||^2 + ||Xy||^2.
InnerProblem build_inner_problem(const BehavioralModel& model, double eps, double alpha) {
  const Index N = model.horizon(), m = model.input_dim(), p = model.output_dim();
  const Matrix G = model.toeplitz();
  const Vector& y = model.y_free_hat;
  if (y.size() != p * N) throw std::invalid_argument("inner_solve: model y_free has wrong size");

  const double hG = h_bound(eps, alpha, spectral_norm(G));
  const double hy = h_bound(eps, alpha, y.norm());
  const double a1 = std::sqrt(1.0 + hG + hy);
  const double a2 = std::sqrt(1.0 + hy);

  const Matrix Ip = Matrix::Identity(p * N, p * N);
  const Matrix Im = Matrix::Identity(m * N, m * N);
  std::vector<detail::QuadTerm> terms;
  terms.push_back({a1 * G, Ip, a1 * Ip});
  terms.push_back({G, G, G});
  terms.push_back({G, y, y});
  terms.push_back({a2 * Im, Ip, Matrix::Zero(m * N, p * N)});
  terms.push_back({Im, G, Im});
  terms.push_back({Im, y, Matrix::Zero(m * N, 1)});

  BoolMask mask = causal_mask(N, m, p);
  mask.bottomRows(m).setConstant(false);
  return InnerProblem{std::move(terms), detail::MaskedPattern(std::move(mask)), N, m, p,
                      static_cast<double>(m)};
}

// one SVD: spectral norm plus the ball projection
std::pair<double, Matrix> clip_with_norm(const Matrix& m, double radius) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector s = svd.singularValues();
  const double top = s.size() ? s(0) : 0.0;
  if (top <= radius) return {top, m};
  for (Index i = 0; i < s.size(); ++i) s(i) = std::min(s(i), radius);
  return {top, svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose()};
}

// Projection onto {masked} ∩ {||.||_2 <= radius}: Dykstra sweeps between the
// subspace and the ball, then a rescale that guarantees exact feasibility of
// the returned point. A few sweeps suffice inside the iteration; termination
// certificates use more.
Matrix project_feasible(const Matrix& X, const detail::MaskedPattern& pat, double radius,
                        int max_sweeps = 40) {
  Matrix x = apply_mask(X, pat.mask);
  Matrix p_corr = Matrix::Zero(x.rows(), x.cols());
  Matrix q_corr = Matrix::Zero(x.rows(), x.cols());
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    auto [norm_in, y] = clip_with_norm(x + p_corr, radius);
    if (sweep == 0 && norm_in <= radius) return x;  // already feasible
    p_corr = x + p_corr - y;
    const Matrix xn = apply_mask(y + q_corr, pat.mask);
    q_corr = y + q_corr - xn;
    x = xn;
    if (spectral_norm(x) <= radius * (1.0 + 1e-11)) break;
  }
  const double norm_x = spectral_norm(x);
  if (norm_x > radius && norm_x > 0) x *= radius / norm_x;
  return x;
}

InnerResult finish_inner(const InnerProblem& prob, const BehavioralModel& model, const Matrix& X,
                         double F) {
  InnerResult r;
  r.maps = eliminate(model.toeplitz(), X, prob.N, prob.m, prob.p);
  r.objective = F;
  r.J_inner = std::sqrt(std::max(F - prob.constant_m, 0.0));
  return r;
}

}  // namespace

InnerResult inner_solve(const BehavioralModel& model, double gamma, double alpha,
                        const RobustConfig& config, const Matrix* warm_start) {
  const double eps = config.epsilon >= 0 ? config.epsilon : model.epsilon;
  if (gamma < 0) throw std::invalid_argument("inner_solve: gamma must be >= 0");
  if (alpha <= 0 && !(alpha == kInf)) throw std::invalid_argument("inner_solve: alpha must be > 0");
  const InnerProblem prob = build_inner_problem(model, eps, std::isfinite(alpha) ? alpha : 0.0);
  const double radius = std::min(gamma, alpha);

  if (radius <= 0) {  // constraint forces Phi_uy = 0
    const Matrix X = Matrix::Zero(prob.m * prob.N, prob.p * prob.N);
    InnerResult r = finish_inner(prob, model, X, detail::objective(prob.terms, X));
    r.constraint_active = true;
    return r;
  }

  // unconstrained minimizer; also the fallback warm start
  NominalOptions lsopts;
  double F_u = 0.0;
  const Matrix X_u = detail::minimize(prob.terms, prob.pattern, lsopts, &F_u);
  if (!std::isfinite(radius) || spectral_norm(X_u) <= radius) {
    InnerResult r = finish_inner(prob, model, X_u, F_u);
    r.pg_norm = detail::gradient(prob.terms, X_u, prob.pattern).norm();
    if (config.collect_history) r.history.push_back(F_u);
    return r;
  }

  // accelerated projected gradient: monotone FISTA, backtracked step size,
  // momentum restart on rejected steps
  double L = std::max(1.0, detail::lipschitz_estimate(prob.terms, prob.pattern));
  Matrix x = project_feasible(warm_start ? *warm_start : X_u, prob.pattern, radius);
  double fx = detail::objective(prob.terms, x);
  Matrix x_prev = x;
  Matrix y = x;
  double fy = fx;
  Matrix grad_y = detail::gradient(prob.terms, y, prob.pattern);
  double t = 1.0;
  InnerResult r;
  r.constraint_active = true;
  r.converged = false;
  if (config.collect_history) r.history.push_back(fx);
  double f_last_check = fx;
  int flat_checks = 0;
  int it = 0;
  for (it = 1; it <= config.max_iter; ++it) {
    // backtrack until the quadratic model at y majorizes f at the step target
    Matrix z;
    double fz;
    for (int bt = 0; bt < 40; ++bt) {
      z = project_feasible(y - grad_y / L, prob.pattern, radius);
      fz = detail::objective(prob.terms, z);
      const Matrix d = z - y;
      const double model_f = fy + grad_y.cwiseProduct(d).sum() + 0.5 * L * d.squaredNorm();
      if (fz <= model_f * (1.0 + 1e-12) + 1e-300) break;
      L *= 2.0;
    }
    Matrix x_next;
    double f_next;
    if (fz <= fx) {
      x_next = z;
      f_next = fz;
    } else {  // keep the best iterate, drop momentum
      x_next = x;
      f_next = fx;
      t = 1.0;
    }
    if (f_next > fx * (1.0 + 1e-15)) r.monotone = false;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_next + (t / t_next) * (z - x_next) + ((t - 1.0) / t_next) * (x_next - x_prev);
    x_prev = x;
    x = x_next;
    fx = f_next;
    fy = detail::objective(prob.terms, y);
    grad_y = detail::gradient(prob.terms, y, prob.pattern);
    t = t_next;
    if (config.collect_history) r.history.push_back(fx);

    // relative-decrease stop, certified by an accurately projected gradient
    if (it % 20 == 0 || it == config.max_iter) {
      const bool flat = (f_last_check - fx) <= config.inner_tol * std::max(1.0, fx);
      f_last_check = fx;
      if (flat) {
        ++flat_checks;
        const Matrix pg =
            (x - project_feasible(x - detail::gradient(prob.terms, x, prob.pattern) / L,
                                  prob.pattern, radius, /*sweeps=*/120)) *
            L;
        r.pg_norm = pg.norm();
        if (r.pg_norm <= config.pg_tol * (1.0 + fx) || flat_checks >= 3) {
          r.converged = true;
          break;
        }
      } else {
        flat_checks = 0;
      }
    }
  }
  if (!r.converged) {
    const Matrix pg =
        (x - project_feasible(x - detail::gradient(prob.terms, x, prob.pattern) / L,
                              prob.pattern, radius, /*sweeps=*/120)) *
        L;
    r.pg_norm = pg.norm();
    r.converged = r.pg_norm <= config.pg_tol * (1.0 + fx);
  }
  r.iterations = it;
  const InnerResult base = finish_inner(prob, model, x, fx);
  r.maps = base.maps;
  r.objective = base.objective;
  r.J_inner = base.J_inner;
  return r;
}

RobustSolution golden_search(const BehavioralModel& model, const RobustConfig& config) {
  const double eps = config.epsilon >= 0 ? config.epsilon : model.epsilon;
  if (eps < 0) throw std::invalid_argument("golden_search: epsilon must be >= 0");

  RobustConfig cfg = config;
  cfg.epsilon = eps;

  // alpha policy: 5x the Phi_uy norm of a preliminary nominal solve on Ghat,
  // kept strictly below 1/eps
  double alpha = cfg.alpha;
  if (alpha <= 0) {
    const InnerResult prelim = inner_solve(model, kInf, kInf, RobustConfig{0.0});
    alpha = 5.0 * spectral_norm(prelim.maps.uy);
    if (alpha <= 0) alpha = 1.0;
    if (eps > 0) alpha = std::min(alpha, (1.0 - cfg.gamma_margin) / eps);
  }
  if (eps > 0 && alpha >= 1.0 / eps)
    throw std::invalid_argument("golden_search: alpha must satisfy alpha < 1/epsilon");

  RobustSolution sol;
  sol.epsilon = eps;
  sol.alpha = alpha;

  auto absorb = [&](const InnerResult& inner) {
    sol.total_inner_iterations += inner.iterations;
    sol.all_converged = sol.all_converged && inner.converged;
    sol.monotone = sol.monotone && inner.monotone;
    if (cfg.collect_history && !inner.history.empty()) sol.histories.push_back(inner.history);
    ++sol.golden_evaluations;
  };

  if (eps == 0.0) {  // outer factor is identically 1: nominal solve on Ghat
    const InnerResult inner = inner_solve(model, kInf, alpha, cfg);
    absorb(inner);
    sol.gamma_star = spectral_norm(inner.maps.uy);
    sol.maps = inner.maps;
    sol.K_hat = controller_from_maps(inner.maps);
    sol.J_inner = inner.J_inner;
    sol.upper_bound = std::sqrt(inner.objective);
    sol.eta = 0.0;
    return sol;
  }

  const double gamma_max = (1.0 - cfg.gamma_margin) / eps;
  struct Eval {
    double gamma;
    double value;
    InnerResult inner;
  };
  std::vector<Eval> evals;

  auto evaluate = [&](double gamma) -> double {
    const Eval* nearest = nullptr;
    for (const auto& e : evals) {
      if (e.gamma == gamma) return e.value;
      if (!nearest || std::abs(e.gamma - gamma) < std::abs(nearest->gamma - gamma)) nearest = &e;
    }
    const InnerResult inner =
        inner_solve(model, gamma, alpha, cfg, nearest ? &nearest->inner.maps.uy : nullptr);
    absorb(inner);
    const double value = std::sqrt(inner.objective) / (1.0 - eps * gamma);
    evals.push_back({gamma, value, inner});
    return value;
  };

  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = gamma_max;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = evaluate(c), fd = evaluate(d);
  while (b - a > cfg.golden_tol * gamma_max) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = evaluate(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = evaluate(d);
    }
  }
  evaluate(0.0);  // gamma = 0 is always feasible; keep it as a candidate

  const Eval* best = &evals.front();
  for (const auto& e : evals)
    if (e.value < best->value) best = &e;

  sol.gamma_star = best->gamma;
  sol.maps = best->inner.maps;
  sol.K_hat = controller_from_maps(best->inner.maps);
  sol.J_inner = best->inner.J_inner;
  sol.upper_bound = best->value;
  sol.eta = eps * spectral_norm(best->inner.maps.uy);
  return sol;
}

FeasibleConstruction feasible_from_nominal(const ClosedLoopMaps& star_maps, const Matrix& Delta,
                                           double eps, double alpha) {
  star_maps.check_dimensions();
  const Index N = star_maps.horizon, m = star_maps.input_dim, p = star_maps.output_dim;
  if (Delta.rows() != p * N || Delta.cols() != m * N)
    throw std::invalid_argument("feasible_from_nominal: Delta has wrong dimensions");
  if (mask_violation(Delta, causal_mask(N, p, m, /*strictly=*/true)) > 1e-10 * (1.0 + Delta.norm()))
    throw std::invalid_argument("feasible_from_nominal: Delta must be strictly causal");
  if (eps < 0) throw std::invalid_argument("feasible_from_nominal: eps must be >= 0");

  const double eta = eps * spectral_norm(star_maps.uy);
  if (eta >= 0.2)
    throw std::runtime_error("feasible_from_nominal: eta = eps*||Phi*_uy|| = " +
                             std::to_string(eta) + " violates the eta < 1/5 hypothesis");
  if (eps == 0.0) return {star_maps, 0.0};

  const double gamma_tilde = std::sqrt(2.0) * eta / (eps * (1.0 - eta));
  if (alpha + 1e-12 < gamma_tilde)
    throw std::runtime_error("feasible_from_nominal: alpha below gamma_tilde");

  // closed loop of K* on Ghat = G + Delta (Delta here is Ghat - G)
  const Matrix M =
      (Matrix::Identity(p * N, p * N) - Delta * star_maps.uy).partialPivLu().solve(
          Matrix::Identity(p * N, p * N));
  const Matrix G = star_maps.yy.partialPivLu().solve(star_maps.yu);  // yy^{-1} yu = G
  const Matrix G_hat = G + Delta;
  const Matrix yy = star_maps.yy * M;
  FeasibleConstruction out;
  out.maps = ClosedLoopMaps(
      yy, yy * G_hat, star_maps.uy * M,
      (Matrix::Identity(m * N, m * N) - star_maps.uy * Delta).partialPivLu().solve(star_maps.uu),
      N, m, p);
  out.gamma_tilde = gamma_tilde;
  return out;
}

double true_cost_of_robust(const BehavioralModel& model, const ClosedLoopMaps& maps_hat,
                           const Matrix& Delta, const Vector& delta_0, const CostWeights& weights,
                           const NoiseModel& noise) {
  maps_hat.check_dimensions();
  const Index N = maps_hat.horizon, m = maps_hat.input_dim, p = maps_hat.output_dim;
  if (Delta.rows() != p * N || Delta.cols() != m * N)
    throw std::invalid_argument("true_cost_of_robust: Delta has wrong dimensions");
  if (mask_violation(Delta, causal_mask(N, p, m, /*strictly=*/true)) > 1e-10 * (1.0 + Delta.norm()))
    throw std::invalid_argument("true_cost_of_robust: Delta must be strictly causal");
  if (delta_0.size() != p * N)
    throw std::invalid_argument("true_cost_of_robust: delta_0 has wrong size");

  // I - Delta*uy is invertible by nilpotency (Delta strictly causal)
  const Matrix M =
      (Matrix::Identity(p * N, p * N) - Delta * maps_hat.uy).partialPivLu().solve(
          Matrix::Identity(p * N, p * N));
  const Matrix uy_true = maps_hat.uy * M;
  const Matrix G_true = model.toeplitz() + Delta;
  const Vector y_true = model.y_free_hat + delta_0;
  const ClosedLoopMaps maps_true = eliminate(G_true, uy_true, N, m, p);
  return cost_closed_form(G_true, y_true, maps_true, weights, noise);
}

double lemma2_upper_bound(const ClosedLoopMaps& maps_hat, const BehavioralModel& model,
                          double alpha) {
  maps_hat.check_dimensions();
  const double eps = model.epsilon;
  const double uy_norm = spectral_norm(maps_hat.uy);
  if (eps * uy_norm >= 1.0)
    throw std::runtime_error("lemma2_upper_bound: eps * ||Phi_uy|| must be < 1");
  if (uy_norm > alpha * (1.0 + 1e-9))
    throw std::runtime_error("lemma2_upper_bound: ||Phi_uy|| exceeds alpha");
  const Matrix G = model.toeplitz();
  const Vector& y = model.y_free_hat;
  const double hG = h_bound(eps, alpha, spectral_norm(G));
  const double hy = h_bound(eps, alpha, y.norm());
  const double F = (1.0 + hG + hy) * maps_hat.yy.squaredNorm() + maps_hat.yu.squaredNorm() +
                   (maps_hat.yy * y).squaredNorm() + (1.0 + hy) * maps_hat.uy.squaredNorm() +
                   maps_hat.uu.squaredNorm() + (maps_hat.uy * y).squaredNorm();
  return std::sqrt(F) / (1.0 - eps * uy_norm);
}

SuboptimalityBound suboptimality_bound(const ClosedLoopMaps& star_maps, double eps, double alpha,
                                       const Matrix& G, const Vector& y_free, const Matrix& G_hat,
                                       const Vector& y_free_hat) {
  star_maps.check_dimensions();
  if (eps < 0 || alpha <= 0)
    throw std::invalid_argument("suboptimality_bound: need eps >= 0 and alpha > 0");
  SuboptimalityBound out;
  const double uy_norm = spectral_norm(star_maps.uy);
  out.eta = eps * uy_norm;
  out.M = h_bound(eps, alpha, spectral_norm(G_hat)) + h_bound(eps, alpha, y_free_hat.norm()) +
          h_bound(eps, uy_norm, spectral_norm(G)) + h_bound(eps, uy_norm, y_free.norm());
  out.V = h_bound(eps, alpha, y_free_hat.norm()) + h_bound(eps, uy_norm, y_free.norm());
  out.value = 20.0 * out.eta + 4.0 * (out.M + out.V);
  const double lo = 5.0 * std::sqrt(2.0) / 4.0 * uy_norm;
  const double hi = 5.0 * uy_norm;
  out.hypotheses_ok =
      uy_norm > 0 && eps < 1.0 / (5.0 * uy_norm) && alpha >= lo - 1e-12 && alpha <= hi + 1e-12;
  return out;
}

void write_robust_solution(const RobustSolution& solution, const std::string& path) {
  nlohmann::json j;
  j["gamma_star"] = solution.gamma_star;
  j["J_inner"] = solution.J_inner;
  j["upper_bound"] = solution.upper_bound;
  j["eta"] = solution.eta;
  j["epsilon"] = solution.epsilon;
  j["alpha"] = solution.alpha;
  j["golden_evaluations"] = solution.golden_evaluations;
  j["total_inner_iterations"] = solution.total_inner_iterations;
  j["all_converged"] = solution.all_converged;
  std::vector<std::vector<double>> k(solution.K_hat.rows());
  for (Index r = 0; r < solution.K_hat.rows(); ++r) {
    k[r].resize(solution.K_hat.cols());
    for (Index c = 0; c < solution.K_hat.cols(); ++c) k[r][c] = solution.K_hat(r, c);
  }
  j["K_hat"] = k;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_robust_solution: cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace datalqg
