#include "mmd_drccp/drccp.hpp"

#include <Eigen/QR>

#include <cmath>
#include <limits>

namespace mmd_drccp {

namespace {

constexpr double kBasisCutoff = 1e-10;
constexpr double kZeroRadiusCutoff = 1e-12;

std::vector<int> range(int first, Index count) {
  std::vector<int> v(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = first + static_cast<int>(i);
  return v;
}

// sum_j M(i, j) z[first + j]
LinExpr row_times(const Matrix& M, Index i, int first) {
  LinExpr e;
  e.terms.reserve(static_cast<std::size_t>(M.cols()));
  for (Index j = 0; j < M.cols(); ++j) {
    if (M(i, j) != 0.0) e.terms.emplace_back(first + static_cast<int>(j), M(i, j));
  }
  return e;
}

LinExpr dot_vars(const Vector& coef, int first) {
  LinExpr e;
  for (Index j = 0; j < coef.size(); ++j) {
    if (coef[j] != 0.0) e.terms.emplace_back(first + static_cast<int>(j), coef[j]);
  }
  return e;
}

void add_decision_rows(const DrccpProblem& prob, ConicProgram& p, int x0) {
  for (Index r = 0; r < prob.G.rows(); ++r) {
    LinExpr e = row_times(prob.G, r, x0);
    e += -prob.d[r];
    p.add_le(std::move(e));
  }
}

void set_cost(const DrccpProblem& prob, ConicProgram& p, int x0) {
  p.set_objective(dot_vars(prob.c, x0), prob.sense);
}

// g0 + mean(V w) + eps * s, where V w = K gamma
LinExpr risk_expr(const Matrix& phi, int g0, int u, int s, double eps) {
  const Index N = phi.rows();
  LinExpr e = LinExpr::var(g0);
  const Vector colmean = phi.colwise().sum().transpose() / static_cast<double>(N);
  e += dot_vars(colmean, u);
  if (eps != 0.0) e.add(s, eps);
  return e;
}

// The function values g(xi_i) = (K gamma)_i are parametrised as V w, with V the
// kept eigenvectors of K (orthonormal columns), so gamma = V Lambda^{-1} w and
// ||g||_H = ||Lambda^{-1/2} w||. Keeping V orthonormal leaves the epigraph rows
// well scaled even when K is numerically singular.
struct Representer {
  Matrix values;     // N x r, K gamma = values * w (orthonormal columns)
  Matrix norm_rows;  // r' x r, ||g||_H = ||norm_rows * w||
  Matrix gamma_map;  // N x r, gamma = gamma_map * w
  Index rank() const { return values.cols(); }
};

// With zero_radius the norm term is inactive, so the cutoff drops to the
// rounding level (only numerically null directions are removed), norm_rows is
// empty, and the columns are restricted to be orthogonal to the all-ones
// vector: g0 alone carries constants, which removes a nearly free direction
// (g0 against the almost-constant top eigenvector).
Representer representer_basis(const Matrix& K, bool zero_radius) {
  const SpectralFactor f = spectral_factor(K, zero_radius ? kZeroRadiusCutoff : kBasisCutoff);
  const Vector inv_sqrt = f.eigenvalues.array().rsqrt();
  const Matrix V = f.phi * inv_sqrt.asDiagonal();
  const Index r = V.cols();
  Matrix Q = Matrix::Identity(r, r);
  if (zero_radius) {
    const Vector a = V.transpose() * Vector::Ones(V.rows());
    Eigen::HouseholderQR<Matrix> qr(a);
    const Matrix H = qr.householderQ() * Matrix::Identity(r, r);
    Q = H.rightCols(r - 1);
  }
  Representer out;
  out.values = V * Q;
  if (zero_radius) {
    out.norm_rows.resize(0, Q.cols());
  } else {
    out.norm_rows = inv_sqrt.asDiagonal() * Q;
  }
  out.gamma_map = V * (inv_sqrt.array().square().matrix().asDiagonal() * Q);
  return out;
}

// ||norm_rows w|| <= s, i.e. sqrt(gamma' K gamma) <= s
void add_norm_cone(ConicProgram& p, const Representer& basis, int w, int s) {
  std::vector<LinExpr> parts;
  parts.reserve(static_cast<std::size_t>(basis.norm_rows.rows()));
  for (Index j = 0; j < basis.norm_rows.rows(); ++j) parts.push_back(row_times(basis.norm_rows, j, w));
  if (parts.empty()) parts.emplace_back();
  p.add_soc(std::move(parts), LinExpr::var(s));
}

void check_sample(const DrccpProblem& prob, const SampleSet& sample) {
  if (sample.size() < 1) throw std::invalid_argument("sample must contain at least one point");
  if (sample.dim() != prob.model.uncertainty_dim()) {
    throw std::invalid_argument("sample dimension does not match the constraint model");
  }
}

Vector slice(const Vector& z, int first, Index count) { return z.segment(first, count); }

double quad_norm(const Matrix& K, const Vector& gamma) {
  return std::sqrt(std::max(0.0, gamma.dot(K * gamma)));
}

}  // namespace

DrccpProblem::DrccpProblem(Vector c_, Sense sense_, Matrix G_, Vector d_, ConstraintModel model_, double alpha_)
    : c(std::move(c_)), sense(sense_), G(std::move(G_)), d(std::move(d_)), model(std::move(model_)), alpha(alpha_) {
  if (G.size() == 0 && G.cols() == 0) G.resize(0, c.size());
  validate();
}

void DrccpProblem::validate() const {
  if (c.size() < 1) throw std::invalid_argument("DrccpProblem: empty cost vector");
  if (c.size() != model.decision_dim()) throw std::invalid_argument("DrccpProblem: cost and model dimensions differ");
  if (G.cols() != c.size() || G.rows() != d.size()) {
    throw std::invalid_argument("DrccpProblem: decision set G must be rows x n with d of length rows");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("DrccpProblem: alpha must be in (0,1)");
}

std::pair<Matrix, Vector> DrccpProblem::simplex(Index n) {
  Matrix G = Matrix::Zero(n + 1, n);
  Vector d = Vector::Zero(n + 1);
  G.row(0).setOnes();
  d[0] = 1.0;
  for (Index j = 0; j < n; ++j) G(j + 1, j) = -1.0;
  return {G, d};
}

std::pair<Matrix, Vector> DrccpProblem::box(const Vector& lower, const Vector& upper) {
  const auto s = SupportPolytope::box(lower, upper);
  return {s.C, s.h};
}

void GuaranteeParams::validate() const {
  if (!(M_f > 0.0)) throw std::invalid_argument("GuaranteeParams: M_f must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("GuaranteeParams: delta must be in (0,1)");
  if (N < 1) throw std::invalid_argument("GuaranteeParams: N must be >= 1");
}

double guarantee_bound(const GuaranteeParams& g) {
  g.validate();
  return g.M_f * std::sqrt(2.0 * std::log(1.0 / g.delta) / static_cast<double>(g.N));
}

// ---- CVaR ---------------------------------------------------------------

ConicProgram build_cvar_socp(const DrccpProblem& prob, const SampleSet& sample, const KernelSpec& spec,
                             const AmbiguityRadius& eps, double offset, CvarLayout* layout) {
  prob.validate();
  eps.validate();
  check_sample(prob, sample);
  const Index N = sample.size();
  const Representer basis = representer_basis(gram(spec, sample), eps.value == 0.0);
  const Matrix& phi = basis.values;

  ConicProgram p;
  CvarLayout L;
  L.x = p.add_variables(static_cast<int>(prob.n()), "x");
  L.g0 = p.add_variable("g0");
  L.gamma = p.add_variables(static_cast<int>(basis.rank()), "w");
  L.t = p.add_variable("t");
  L.s = p.add_variable("s");

  set_cost(prob, p, L.x);
  add_decision_rows(prob, p, L.x);

  LinExpr risk = risk_expr(phi, L.g0, L.gamma, L.s, eps.value);
  risk.add(L.t, -prob.alpha);
  risk += offset;
  p.add_le(std::move(risk));
  add_norm_cone(p, basis, L.gamma, L.s);

  const auto xv = range(L.x, prob.n());
  for (Index i = 0; i < N; ++i) {
    LinExpr rhs = row_times(phi, i, L.gamma);
    rhs.add(L.g0, 1.0);
    emit_epigraph(prob.model, p, xv, sample.row(i), L.t, rhs);
  }
  L.gamma_map = basis.gamma_map;
  if (layout) *layout = std::move(L);
  return p;
}

DrccpSolution solve_cvar(const DrccpProblem& prob, const SampleSet& sample, const KernelSpec& spec,
                         const AmbiguityRadius& eps, const SolverTolerances& tol, double offset) {
  CvarLayout L;
  const ConicProgram p = build_cvar_socp(prob, sample, spec, eps, offset, &L);
  const ConicSolution cs = solve_continuous(p, tol);

  DrccpSolution out;
  out.status = cs.status;
  out.epsilon = eps.value;
  out.iterations = cs.iterations;
  if (!cs.optimal()) return out;

  const Matrix K = gram(spec, sample);
  out.x = slice(cs.primal, L.x, prob.n());
  out.g0 = cs.primal[L.g0];
  out.gamma = L.gamma_map * slice(cs.primal, L.gamma, L.gamma_map.cols());
  out.t = cs.primal[L.t];
  out.objective = prob.c.dot(out.x);
  out.norm_g = quad_norm(K, out.gamma);
  out.risk_lhs = out.g0 + (K * out.gamma).mean() + eps.value * out.norm_g - out.t * prob.alpha;
  return out;
}

// ---- MIP ----------------------------------------------------------------

ConicProgram build_exact_mip(const DrccpProblem& prob, const SampleSet& sample, const KernelSpec& spec,
                             const AmbiguityRadius& eps, const MipConfig& mip, MipLayout* layout) {
  prob.validate();
  eps.validate();
  check_sample(prob, sample);
  if (!mip.big_M) throw ConfigError("MIP path requires big_M (solver.big_M)");
  const double M = *mip.big_M;
  if (!(M > 0.0)) throw ConfigError("big_M must be positive");
  if (!prob.model.is_affine_in_x()) {
    throw UnsupportedModelError("MIP path requires a model affine in x (affine, or piecewise_affine with one piece); got '" +
                                prob.model.kind() + "'");
  }
  const Index N = sample.size();
  const Representer basis = representer_basis(gram(spec, sample), eps.value == 0.0);
  const Matrix& phi = basis.values;

  ConicProgram p;
  MipLayout L;
  L.x = p.add_variables(static_cast<int>(prob.n()), "x");
  L.g0 = p.add_variable("g0");
  L.gamma = p.add_variables(static_cast<int>(basis.rank()), "w");
  L.s = p.add_variable("s");
  L.mu1 = p.add_variables(static_cast<int>(N), "mu1_");
  L.mu2 = p.add_variables(static_cast<int>(N), "mu2_");
  for (Index i = 0; i < N; ++i) {
    p.mark_binary(L.mu1 + static_cast<int>(i));
    p.mark_binary(L.mu2 + static_cast<int>(i));
  }

  set_cost(prob, p, L.x);
  add_decision_rows(prob, p, L.x);

  LinExpr risk = risk_expr(phi, L.g0, L.gamma, L.s, eps.value);
  risk += -prob.alpha;
  p.add_le(std::move(risk));
  add_norm_cone(p, basis, L.gamma, L.s);

  for (Index i = 0; i < N; ++i) {
    const int m1 = L.mu1 + static_cast<int>(i);
    const int m2 = L.mu2 + static_cast<int>(i);
    const auto [coef, cst] = prob.model.affine_in_x(sample.row(i));
    LinExpr f = dot_vars(coef, L.x);
    f += cst;
    // f >= -(1 - mu1) M
    LinExpr lo = -1.0 * f;
    lo += -M;
    lo.add(m1, M);
    p.add_le(std::move(lo));
    // f <= (1 - mu2) M
    LinExpr hi = f;
    hi += -M;
    hi.add(m2, M);
    p.add_le(std::move(hi));
    LinExpr one = LinExpr::var(m1) + LinExpr::var(m2);
    one += -1.0;
    p.add_eq(std::move(one));
    // g0 + (K gamma)_i >= mu1
    LinExpr maj = -1.0 * row_times(phi, i, L.gamma);
    maj.add(L.g0, -1.0);
    maj.add(m1, 1.0);
    p.add_le(std::move(maj));
  }
  L.gamma_map = basis.gamma_map;
  if (layout) *layout = std::move(L);
  return p;
}

DrccpSolution solve_mip(const DrccpProblem& prob, const SampleSet& sample, const KernelSpec& spec,
                        const AmbiguityRadius& eps, const MipConfig& mip, const SolverTolerances& tol) {
  MipLayout L;
  const ConicProgram p = build_exact_mip(prob, sample, spec, eps, mip, &L);
  EnumerationOptions opt;
  opt.max_binaries = mip.max_binaries;
  const ConicSolution cs = solve_binary_enumerate(p, tol, opt);

  DrccpSolution out;
  out.status = cs.status;
  out.epsilon = eps.value;
  out.iterations = cs.iterations;
  if (!cs.optimal()) return out;

  const Index N = sample.size();
  const Matrix K = gram(spec, sample);
  out.x = slice(cs.primal, L.x, prob.n());
  out.g0 = cs.primal[L.g0];
  out.gamma = L.gamma_map * slice(cs.primal, L.gamma, L.gamma_map.cols());
  out.mu = slice(cs.primal, L.mu1, N).array().round();
  out.objective = prob.c.dot(out.x);
  out.norm_g = quad_norm(K, out.gamma);
  out.risk_lhs = out.g0 + (K * out.gamma).mean() + eps.value * out.norm_g - prob.alpha;
  return out;
}

double suggest_big_m(const DrccpProblem& prob, const SampleSet& sample, const SolverTolerances& tol) {
  prob.validate();
  check_sample(prob, sample);
  if (!prob.model.is_affine_in_x()) throw UnsupportedModelError("suggest_big_m needs a model affine in x");
  double best = 0.0;
  for (Index i = 0; i < sample.size(); ++i) {
    const auto [coef, cst] = prob.model.affine_in_x(sample.row(i));
    for (Sense sense : {Sense::Minimize, Sense::Maximize}) {
      ConicProgram p;
      const int x0 = p.add_variables(static_cast<int>(prob.n()), "x");
      add_decision_rows(prob, p, x0);
      LinExpr obj = dot_vars(coef, x0);
      obj += cst;
      p.set_objective(std::move(obj), sense);
      const ConicSolution cs = solve_continuous(p, tol);
      if (cs.status == SolveStatus::Unbounded) {
        throw ConfigError("suggest_big_m: |f| is unbounded over the decision set; supply big_M");
      }
      if (!cs.optimal()) throw NumericalError("suggest_big_m: LP over the decision set failed (" + to_string(cs.status) + ")");
      best = std::max(best, std::abs(cs.objective_value));
    }
  }
  return best > 0.0 ? best : 1.0;
}

// ---- tractable PWA ------------------------------------------------------

bool support_is_empty(const SupportPolytope& support, const SolverTolerances& tol) {
  ConicProgram p;
  const int x0 = p.add_variables(static_cast<int>(support.C.cols()), "xi");
  for (Index r = 0; r < support.C.rows(); ++r) {
    LinExpr e = row_times(support.C, r, x0);
    e += -support.h[r];
    p.add_le(std::move(e));
  }
  p.set_objective(LinExpr(), Sense::Minimize);
  return solve_continuous(p, tol).status == SolveStatus::Infeasible;
}

ConicProgram build_tractable_pwa(const DrccpProblem& prob, const SupportPolytope& support, const SampleSet& sample,
                                 const AmbiguityRadius& eps, const TractableOptions& options,
                                 TractableLayout* layout) {
  prob.validate();
  eps.validate();
  check_sample(prob, sample);
  const auto* pwa = std::get_if<PiecewiseAffine>(&prob.model.variant());
  if (!pwa) {
    throw UnsupportedModelError("tractable path requires a piecewise_affine model; got '" + prob.model.kind() + "'");
  }
  const Index m = prob.model.uncertainty_dim();
  support.validate(m);
  const Index P = support.C.rows();
  const Matrix& Xi = sample.points();  // N x m
  const Representer basis = representer_basis(gram(KernelSpec::linear_plus_one(), sample), eps.value == 0.0);
  const Matrix& phi = basis.values;

  ConicProgram p;
  TractableLayout L;
  L.x = p.add_variables(static_cast<int>(prob.n()), "x");
  L.g0 = p.add_variable("g0");
  L.beta = p.add_variables(static_cast<int>(basis.rank()), "w");
  L.t = p.add_variable("t");
  L.s = p.add_variable("s");
  for (std::size_t k = 0; k < pwa->pieces.size(); ++k) {
    L.y1.push_back(p.add_variables(static_cast<int>(P), "y1_" + std::to_string(k) + "_"));
  }
  L.y2 = p.add_variables(static_cast<int>(P), "y2_");

  set_cost(prob, p, L.x);
  add_decision_rows(prob, p, L.x);

  LinExpr risk = risk_expr(phi, L.g0, L.beta, L.s, eps.value);
  risk.add(L.t, -prob.alpha);
  p.add_le(std::move(risk));
  add_norm_cone(p, basis, L.beta, L.s);
  if (options.t_nonneg) p.add_le(LinExpr::var(L.t, -1.0));

  // g(xi) = 1'beta + (Xi' beta)' xi with beta = coef u
  const Vector ones_coef = basis.gamma_map.colwise().sum().transpose();
  const Matrix XiT = Xi.transpose() * basis.gamma_map;  // m x r
  auto add_block = [&](int y0, const Matrix* A, const Vector* bx, double b0, bool with_t) {
    // max_{C xi <= h} (A'x - Xi'beta)' xi  replaced by  min h'y, C'y = A'x - Xi'beta, y >= 0
    LinExpr head = dot_vars(support.h, y0) - dot_vars(ones_coef, L.beta);
    head.add(L.g0, -1.0);
    if (with_t) head.add(L.t, 1.0);
    if (bx) head += dot_vars(*bx, L.x);
    head += b0;
    p.add_le(std::move(head));
    for (Index j = 0; j < m; ++j) {
      LinExpr e = row_times(support.C.transpose(), j, y0);
      e += row_times(XiT, j, L.beta);
      if (A) e -= row_times(A->transpose(), j, L.x);
      p.add_eq(std::move(e));
    }
    for (Index r = 0; r < P; ++r) p.add_le(LinExpr::var(y0 + static_cast<int>(r), -1.0));
  };
  for (std::size_t k = 0; k < pwa->pieces.size(); ++k) {
    const auto& piece = pwa->pieces[k];
    add_block(L.y1[k], &piece.A, &piece.bx, piece.b0, true);
  }
  add_block(L.y2, nullptr, nullptr, 0.0, false);

  L.gamma_map = basis.gamma_map;
  if (layout) *layout = std::move(L);
  return p;
}

DrccpSolution solve_tractable(const DrccpProblem& prob, const SupportPolytope& support, const SampleSet& sample,
                              const AmbiguityRadius& eps, const SolverTolerances& tol,
                              const TractableOptions& options) {
  TractableLayout L;
  const ConicProgram p = build_tractable_pwa(prob, support, sample, eps, options, &L);
  DrccpSolution out;
  if (support_is_empty(support, tol)) {
    out.warnings.push_back(
        "support polytope is empty: the dual rows of the robust counterpart are unbounded below, so the "
        "piecewise constraints are vacuous");
  }
  const ConicSolution cs = solve_continuous(p, tol);
  out.status = cs.status;
  out.epsilon = eps.value;
  out.iterations = cs.iterations;
  if (!cs.optimal()) return out;

  const Matrix K = gram(KernelSpec::linear_plus_one(), sample);
  out.x = slice(cs.primal, L.x, prob.n());
  out.g0 = cs.primal[L.g0];
  out.gamma = L.gamma_map * slice(cs.primal, L.beta, L.gamma_map.cols());
  out.t = cs.primal[L.t];
  out.objective = prob.c.dot(out.x);
  out.norm_g = quad_norm(K, out.gamma);
  out.risk_lhs = out.g0 + (K * out.gamma).mean() + eps.value * out.norm_g - out.t * prob.alpha;
  return out;
}

// ---- audits -------------------------------------------------------------

SampledAudit audit_sampled(const ConstraintModel& model, const Matrix& K, double eps, double alpha,
                           const SampleSet& sample, const Vector& x, double g0, const Vector& gamma, double t) {
  const Index N = sample.size();
  if (K.rows() != N || K.cols() != N || gamma.size() != N) throw std::invalid_argument("audit_sampled: size mismatch");
  const Vector g = K * gamma;
  SampledAudit a;
  a.norm_g = quad_norm(K, gamma);
  a.risk_lhs = g0 + g.mean() + eps * a.norm_g - t * alpha;
  a.max_epigraph_excess = -std::numeric_limits<double>::infinity();
  a.min_majorant = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < N; ++i) {
    const double f = evaluate(model, x, sample.row(i));
    a.max_epigraph_excess = std::max(a.max_epigraph_excess, f + t - g0 - g[i]);
    a.min_majorant = std::min(a.min_majorant, g0 + g[i]);
  }
  return a;
}

}  // namespace mmd_drccp
