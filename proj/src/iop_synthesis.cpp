#include "datalqg/iop_synthesis.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "masked_least_squares.hpp"

namespace datalqg {

ClosedLoopMaps::ClosedLoopMaps(Matrix yy_, Matrix yu_, Matrix uy_, Matrix uu_, Index horizon_,
                               Index input_dim_, Index output_dim_)
    : yy(std::move(yy_)),
      yu(std::move(yu_)),
      uy(std::move(uy_)),
      uu(std::move(uu_)),
      horizon(horizon_),
      input_dim(input_dim_),
      output_dim(output_dim_) {
  check_dimensions();
}

void ClosedLoopMaps::check_dimensions() const {
  const Index pN = output_dim * horizon, mN = input_dim * horizon;
  if (horizon < 1 || input_dim < 1 || output_dim < 1 || yy.rows() != pN || yy.cols() != pN ||
      yu.rows() != pN || yu.cols() != mN || uy.rows() != mN || uy.cols() != pN ||
      uu.rows() != mN || uu.cols() != mN)
    throw std::invalid_argument("ClosedLoopMaps: inconsistent dimensions");
}

double ClosedLoopMaps::causality_violation() const {
  const Index N = horizon, m = input_dim, p = output_dim;
  double v = mask_violation(yy, causal_mask(N, p, p));
  v = std::max(v, mask_violation(yu, causal_mask(N, p, m)));
  v = std::max(v, mask_violation(uy, causal_mask(N, m, p)));
  v = std::max(v, mask_violation(uu, causal_mask(N, m, m)));
  return v;
}

namespace {

void check_plant_matrix(const Matrix& G, Index N, Index m, Index p, const char* who) {
  if (G.rows() != p * N || G.cols() != m * N)
    throw std::invalid_argument(std::string(who) + ": G has wrong dimensions");
  const double viol = mask_violation(G, causal_mask(N, p, m, /*strictly=*/true));
  if (viol > 1e-9 * (1.0 + G.norm()))
    throw std::invalid_argument(std::string(who) + ": G must be strictly causal");
}

}  // namespace

ClosedLoopMaps maps_from_controller(const Matrix& G, const Matrix& K, Index horizon,
                                    Index input_dim, Index output_dim) {
  const Index N = horizon, m = input_dim, p = output_dim;
  check_plant_matrix(G, N, m, p, "maps_from_controller");
  if (K.rows() != m * N || K.cols() != p * N)
    throw std::invalid_argument("maps_from_controller: K has wrong dimensions");
  if (mask_violation(K, causal_mask(N, m, p)) > 1e-8 * (1.0 + K.norm()))
    throw std::invalid_argument("maps_from_controller: K is not causal");
  const Matrix Kc = apply_mask(K, causal_mask(N, m, p));

  // I - GK is unipotent lower-triangular, LU factors exactly
  const Matrix S = Matrix::Identity(p * N, p * N) - G * Kc;
  Eigen::PartialPivLU<Matrix> lu(S);
  const Matrix yy = lu.solve(Matrix::Identity(p * N, p * N));
  const Matrix yu = yy * G;
  const Matrix uy = Kc * yy;
  const Matrix uu = Matrix::Identity(m * N, m * N) + Kc * yu;  // (I - KG)^{-1}
  return ClosedLoopMaps(yy, yu, uy, uu, N, m, p);
}

Matrix controller_from_maps(const ClosedLoopMaps& maps) {
  maps.check_dimensions();
  const double viol = maps.causality_violation();
  const double scale = 1.0 + std::max({maps.yy.norm(), maps.yu.norm(), maps.uy.norm(),
                                       maps.uu.norm()});
  if (viol > 1e-8 * scale)
    throw std::invalid_argument("controller_from_maps: maps violate the causal mask");

  Eigen::JacobiSVD<Matrix> svd(maps.yy);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) < 1e-12 * s(0))
    throw std::runtime_error("controller_from_maps: Phi_yy is numerically singular");

  // K = uy * yy^{-1}, solved as yy^T K^T = uy^T
  const Matrix K = maps.yy.transpose().partialPivLu().solve(maps.uy.transpose()).transpose();
  const BoolMask mask = causal_mask(maps.horizon, maps.input_dim, maps.output_dim);
  if (mask_violation(K, mask) > 1e-8 * (1.0 + K.norm()))
    throw std::runtime_error("controller_from_maps: recovered controller is not causal");
  return apply_mask(K, mask);
}

ClosedLoopMaps eliminate(const Matrix& G, const Matrix& Phi_uy, Index horizon, Index input_dim,
                         Index output_dim) {
  const Index N = horizon, m = input_dim, p = output_dim;
  check_plant_matrix(G, N, m, p, "eliminate");
  if (Phi_uy.rows() != m * N || Phi_uy.cols() != p * N)
    throw std::invalid_argument("eliminate: Phi_uy has wrong dimensions");
  if (mask_violation(Phi_uy, causal_mask(N, m, p)) > 1e-8 * (1.0 + Phi_uy.norm()))
    throw std::invalid_argument("eliminate: Phi_uy is not causal");
  const Matrix yy = Matrix::Identity(p * N, p * N) + G * Phi_uy;
  return ClosedLoopMaps(yy, yy * G, Phi_uy, Matrix::Identity(m * N, m * N) + Phi_uy * G, N, m, p);
}

double achievability_residual(const Matrix& G, const ClosedLoopMaps& maps) {
  maps.check_dimensions();
  const Index pN = maps.output_dim * maps.horizon, mN = maps.input_dim * maps.horizon;
  if (G.rows() != pN || G.cols() != mN)
    throw std::invalid_argument("achievability_residual: G has wrong dimensions");
  const Matrix Ip = Matrix::Identity(pN, pN), Im = Matrix::Identity(mN, mN);
  const double left = std::sqrt((maps.yy - G * maps.uy - Ip).squaredNorm() +
                                (maps.yu - G * maps.uu).squaredNorm());
  const double right = std::sqrt((maps.yu - maps.yy * G).squaredNorm() +
                                 (maps.uu - maps.uy * G - Im).squaredNorm());
  return std::max({left, right, maps.causality_violation()});
}

namespace detail {

double lipschitz_estimate(const std::vector<QuadTerm>& terms, const MaskedPattern& pat,
                          Index iters) {
  Matrix x = Matrix::Zero(pat.mask.rows(), pat.mask.cols());
  // deterministic non-degenerate start spread over the free entries
  double c = 1.0;
  for (const auto& [r, q] : pat.entries) {
    x(r, q) = c;
    c = -0.7 * c + 0.31;
  }
  double norm = x.norm();
  if (norm == 0.0) return 1.0;
  x /= norm;
  double lam = 1.0;
  for (Index i = 0; i < iters; ++i) {
    Matrix y = hessian_apply(terms, x, pat);
    lam = y.norm();
    if (lam <= 0) return 1.0;
    x = y / lam;
  }
  return lam;
}

namespace {

// dense normal equations over the selected entries
Matrix solve_dense(const std::vector<QuadTerm>& terms, const MaskedPattern& pat) {
  const Index d = pat.size();
  Matrix H = Matrix::Zero(d, d);
  Vector rhs = Vector::Zero(d);
  Matrix a;  // column buffer: stacked vec(P e_rc Q) per term
  Index rows = 0;
  for (const auto& t : terms) rows += t.P.rows() * t.Q.cols();
  Matrix A(rows, d);
  Vector b(rows);
  Index off = 0;
  for (const auto& t : terms) {
    const Index rp = t.P.rows(), cq = t.Q.cols();
    for (Index k = 0; k < d; ++k) {
      const auto [r, q] = pat.entries[k];
      // vec(P(:,r) * Q(q,:)) laid out column-major
      for (Index j = 0; j < cq; ++j)
        A.block(off + j * rp, k, rp, 1) = t.P.col(r) * t.Q(q, j);
    }
    for (Index j = 0; j < cq; ++j) b.segment(off + j * rp, rp) = -t.R0.col(j);
    off += rp * cq;
  }
  H.noalias() = A.transpose() * A;
  rhs.noalias() = A.transpose() * b;
  Eigen::LLT<Matrix> llt(H);
  Vector x;
  if (llt.info() == Eigen::Success) {
    x = llt.solve(rhs);
  } else {
    x = H.ldlt().solve(rhs);
  }
  Matrix X = Matrix::Zero(pat.mask.rows(), pat.mask.cols());
  for (Index k = 0; k < d; ++k) X(pat.entries[k].first, pat.entries[k].second) = x(k);
  return X;
}

Matrix solve_cg(const std::vector<QuadTerm>& terms, const MaskedPattern& pat,
                const NominalOptions& opts) {
  Matrix x = Matrix::Zero(pat.mask.rows(), pat.mask.cols());
  Matrix r = -gradient(terms, x, pat);  // rhs of H x = -g(0)
  Matrix d = r;
  double rs = r.squaredNorm();
  const double stop = opts.cg_tol * opts.cg_tol * std::max(rs, 1.0);
  for (Index it = 0; it < opts.cg_max_iter && rs > stop; ++it) {
    const Matrix hd = hessian_apply(terms, d, pat);
    const double alpha = rs / d.cwiseProduct(hd).sum();
    x += alpha * d;
    r -= alpha * hd;
    const double rs_new = r.squaredNorm();
    d = r + (rs_new / rs) * d;
    rs = rs_new;
  }
  return x;
}

}  // namespace

Matrix minimize(const std::vector<QuadTerm>& terms, const MaskedPattern& pat,
                const NominalOptions& opts, double* objective_out) {
  const Matrix X = pat.size() <= opts.dense_threshold ? solve_dense(terms, pat)
                                                      : solve_cg(terms, pat, opts);
  if (objective_out) *objective_out = objective(terms, X);
  return X;
}

}  // namespace detail

namespace {

// The six addends of the stacked objective after elimination, as quadratic
// terms in X = Phi_uy. The input-channel weight drops the terminal step.
std::vector<detail::QuadTerm> nominal_terms(const Matrix& G, const Vector& y_free,
                                            const CostWeights& weights, const NoiseModel& noise) {
  const Index N = weights.horizon, m = weights.m(), p = weights.p();
  Matrix sv = Matrix::Zero(p * N, p * N), sw = Matrix::Zero(m * N, m * N);
  for (Index t = 0; t < N; ++t) {
    sv.block(t * p, t * p, p, p) = noise.sqrt_v;
    sw.block(t * m, t * m, m, m) = noise.sqrt_w;
  }
  const Matrix& lh = weights.output_weight_sqrt();
  const Matrix& rh = weights.input_weight_sqrt();
  const Matrix lG = lh * G;
  const Matrix Gsw = G * sw;
  std::vector<detail::QuadTerm> terms;
  terms.push_back({lG, sv, lh * sv});                                      // L(I+GX)Sv
  terms.push_back({lG, Gsw, lh * Gsw});                                    // L(I+GX)GSw
  terms.push_back({lG, y_free, lh * y_free});                              // L(I+GX)y
  terms.push_back({rh, sv, Matrix::Zero(rh.rows(), sv.cols())});           // R X Sv
  terms.push_back({rh, Gsw, rh * sw});                                     // R(I+XG)Sw
  terms.push_back({rh, y_free, Matrix::Zero(rh.rows(), 1)});               // R X y
  return terms;
}

}  // namespace

SynthesisResult solve_nominal(const Matrix& G, const Vector& y_free, const CostWeights& weights,
                              const NoiseModel& noise, const NominalOptions& opts) {
  const Index N = weights.horizon, m = weights.m(), p = weights.p();
  check_plant_matrix(G, N, m, p, "solve_nominal");
  if (y_free.size() != p * N) throw std::invalid_argument("solve_nominal: y_free has wrong size");
  if (!G.allFinite() || !y_free.allFinite())
    throw std::invalid_argument("solve_nominal: non-finite inputs");
  if (noise.sigma_v.rows() != p || noise.sigma_w.rows() != m)
    throw std::invalid_argument("solve_nominal: noise dimensions do not match weights");

  // causal Phi_uy with the terminal block row pinned (zero cost curvature)
  BoolMask mask = causal_mask(N, m, p);
  mask.bottomRows(m).setConstant(false);
  const detail::MaskedPattern pattern(std::move(mask));

  double j2 = 0.0;
  const Matrix X =
      detail::minimize(nominal_terms(G, y_free, weights, noise), pattern, opts, &j2);

  SynthesisResult res;
  res.maps = eliminate(G, X, N, m, p);
  res.K = controller_from_maps(res.maps);
  res.cost_sq = j2;
  res.cost = std::sqrt(std::max(j2, 0.0));
  res.model = "exact";
  return res;
}

void write_synthesis_result(const SynthesisResult& result, const std::string& path) {
  nlohmann::json j;
  j["cost"] = result.cost;
  j["cost_sq"] = result.cost_sq;
  j["model"] = result.model;
  j["horizon"] = result.maps.horizon;
  j["input_dim"] = result.maps.input_dim;
  j["output_dim"] = result.maps.output_dim;
  std::vector<std::vector<double>> k(result.K.rows());
  for (Index r = 0; r < result.K.rows(); ++r) {
    k[r].resize(result.K.cols());
    for (Index c = 0; c < result.K.cols(); ++c) k[r][c] = result.K(r, c);
  }
  j["K"] = k;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_synthesis_result: cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace datalqg
