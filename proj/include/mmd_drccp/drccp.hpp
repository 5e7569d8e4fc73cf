#pragma once

#include "mmd_drccp/common.hpp"
#include "mmd_drccp/conic.hpp"
#include "mmd_drccp/constraint_models.hpp"
#include "mmd_drccp/kernels.hpp"
#include "mmd_drccp/mmd.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mmd_drccp {

/// min/max c'x  s.t.  G x <= d,  sup_P CVaR / chance constraint on f(x, xi) at level alpha.
struct DrccpProblem {
  Vector c;
  Sense sense = Sense::Minimize;
  Matrix G;  // rows x n, may have zero rows
  Vector d;
  ConstraintModel model;
  double alpha = 0.1;

  DrccpProblem(Vector c, Sense sense, Matrix G, Vector d, ConstraintModel model, double alpha);

  Index n() const { return c.size(); }
  void validate() const;

  /// {x : sum x <= 1, x >= 0} in R^n.
  static std::pair<Matrix, Vector> simplex(Index n);
  /// {x : lower <= x <= upper}.
  static std::pair<Matrix, Vector> box(const Vector& lower, const Vector& upper);
};

struct DrccpSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  Vector x;
  double g0 = 0.0;
  Vector gamma;  // representer coefficients (beta on the tractable path)
  double t = 0.0;
  double objective = 0.0;  // c'x in the problem's own sense
  double epsilon = 0.0;
  double norm_g = 0.0;     // sqrt(gamma' K gamma)
  double risk_lhs = 0.0;   // g0 + mean(K gamma) + eps * norm_g - (t alpha | alpha)
  Vector mu;               // MIP path only: violation indicators
  int iterations = 0;
  std::vector<std::string> warnings;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

struct MipConfig {
  std::optional<double> big_M;
  int max_binaries = 20;
};

struct GuaranteeParams {
  double M_f = 1.0;
  double delta = 0.05;
  long long N = 1;
  void validate() const;
};

/// M_f * sqrt(2 log(1/delta) / N).
double guarantee_bound(const GuaranteeParams& g);

// ---- CVaR path ----------------------------------------------------------

/// Variable layout of the CVaR program: x, g0, w, t, s (norm auxiliary).
/// The representer coefficients are gamma = gamma_map * w: w are coordinates
/// of K gamma in the eigenvectors of the Gram matrix whose eigenvalue exceeds
/// 1e-10 times the largest one (1e-12 when eps = 0, where only numerically
/// null directions are dropped and the constant direction is left to g0).
struct CvarLayout {
  int x = 0;
  int g0 = 0;
  int gamma = 0;  // first w variable
  int t = 0;
  int s = 0;
  Matrix gamma_map;
};

/// `offset` is added to the left-hand side of the risk row (constraint back-off).
ConicProgram build_cvar_socp(const DrccpProblem& prob, const SampleSet& sample, const KernelSpec& spec,
                             const AmbiguityRadius& eps, double offset = 0.0, CvarLayout* layout = nullptr);

DrccpSolution solve_cvar(const DrccpProblem& prob, const SampleSet& sample, const KernelSpec& spec,
                         const AmbiguityRadius& eps, const SolverTolerances& tol = {}, double offset = 0.0);

// ---- exact chance-constraint MIP ----------------------------------------

struct MipLayout {
  int x = 0;
  int g0 = 0;
  int gamma = 0;  // first w variable, as in CvarLayout
  int s = 0;
  int mu1 = 0;
  int mu2 = 0;
  Matrix gamma_map;
};

ConicProgram build_exact_mip(const DrccpProblem& prob, const SampleSet& sample, const KernelSpec& spec,
                             const AmbiguityRadius& eps, const MipConfig& mip, MipLayout* layout = nullptr);

DrccpSolution solve_mip(const DrccpProblem& prob, const SampleSet& sample, const KernelSpec& spec,
                        const AmbiguityRadius& eps, const MipConfig& mip, const SolverTolerances& tol = {});

/// Valid big-M: max_i max_{x in decision set} |f(x, xi_i)|, via two LPs per
/// sample. Requires a model affine in x and a bounded decision set.
double suggest_big_m(const DrccpProblem& prob, const SampleSet& sample, const SolverTolerances& tol = {});

// ---- tractable piecewise-affine path ------------------------------------

struct TractableOptions {
  bool t_nonneg = false;
};

struct TractableLayout {
  int x = 0;
  int g0 = 0;
  int beta = 0;  // first w variable, beta = gamma_map * w
  int t = 0;
  int s = 0;
  std::vector<int> y1;  // first index of y1^(k), p entries each
  int y2 = 0;
  Matrix gamma_map;
};

ConicProgram build_tractable_pwa(const DrccpProblem& prob, const SupportPolytope& support, const SampleSet& sample,
                                 const AmbiguityRadius& eps, const TractableOptions& options = {},
                                 TractableLayout* layout = nullptr);

DrccpSolution solve_tractable(const DrccpProblem& prob, const SupportPolytope& support, const SampleSet& sample,
                              const AmbiguityRadius& eps, const SolverTolerances& tol = {},
                              const TractableOptions& options = {});

/// True when {xi : C xi <= h} has no point (decided by an LP).
bool support_is_empty(const SupportPolytope& support, const SolverTolerances& tol = {});

// ---- audits -------------------------------------------------------------

/// Check of the sampled constraint set at (x, g0, gamma, t):
///   g0 + mean(K gamma) + eps sqrt(gamma' K gamma) <= t alpha,
///   f(x, xi_i) + t <= g0 + (K gamma)_i,  0 <= g0 + (K gamma)_i.
struct SampledAudit {
  double risk_lhs = 0.0;         // left side minus t alpha
  double max_epigraph_excess = 0.0;  // max_i f_i + t - g0 - (K gamma)_i
  double min_majorant = 0.0;     // min_i g0 + (K gamma)_i
  double norm_g = 0.0;

  bool ok(double tol = 1e-6) const {
    return risk_lhs <= tol && max_epigraph_excess <= tol && min_majorant >= -tol;
  }
};

SampledAudit audit_sampled(const ConstraintModel& model, const Matrix& K, double eps, double alpha,
                           const SampleSet& sample, const Vector& x, double g0, const Vector& gamma, double t);

}  // namespace mmd_drccp
