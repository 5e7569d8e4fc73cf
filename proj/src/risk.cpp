#include "mmd_drccp/risk.hpp"

#include "mmd_drccp/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace mmd_drccp {

namespace {

void check_inputs(const std::vector<double>& values, double alpha, const char* who) {
  if (values.empty()) throw std::invalid_argument(std::string(who) + ": empty value list");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument(std::string(who) + ": alpha must be in (0,1)");
}

}  // namespace

double empirical_cvar(std::vector<double> values, double alpha) {
  check_inputs(values, alpha, "empirical_cvar");
  std::sort(values.begin(), values.end(), std::greater<>());
  const double n = static_cast<double>(values.size());
  // Mass alpha*n taken from the top, whole atoms first.
  double remaining = alpha * n;
  double acc = 0.0;
  for (double v : values) {
    if (remaining <= 0.0) break;
    const double w = std::min(1.0, remaining);
    acc += w * v;
    remaining -= w;
  }
  return acc / (alpha * n);
}

double empirical_var(std::vector<double> values, double alpha) {
  check_inputs(values, alpha, "empirical_var");
  const auto n = static_cast<long long>(values.size());
  long long k = robust_ceil((1.0 - alpha) * static_cast<double>(n));
  k = std::clamp(k, 1LL, n);
  auto it = values.begin() + (k - 1);
  std::nth_element(values.begin(), it, values.end());
  return *it;
}

std::vector<double> constraint_values(const ConstraintModel& model, const Vector& x, const SampleSet& sample) {
  if (sample.dim() != model.uncertainty_dim() || x.size() != model.decision_dim()) {
    throw std::invalid_argument("constraint_values: dimension mismatch");
  }
  std::vector<double> out(static_cast<std::size_t>(sample.size()));
  for (Index i = 0; i < sample.size(); ++i) out[static_cast<std::size_t>(i)] = evaluate(model, x, sample.row(i));
  return out;
}

double violation_probability(const ConstraintModel& model, const Vector& x, const SampleSet& eval_sample) {
  if (eval_sample.empty()) throw std::invalid_argument("violation_probability: empty sample");
  const auto vals = constraint_values(model, x, eval_sample);
  const auto bad = std::count_if(vals.begin(), vals.end(), [](double v) { return v > 0.0; });
  return static_cast<double>(bad) / static_cast<double>(vals.size());
}

SampleSet sample_gaussian(const Vector& mean, const Vector& diag_cov, Index n, std::uint64_t seed) {
  if (mean.size() != diag_cov.size() || mean.size() == 0) {
    throw std::invalid_argument("sample_gaussian: mean and diag_cov must have equal positive length");
  }
  if (n < 1) throw std::invalid_argument("sample_gaussian: n must be >= 1");
  if (!((diag_cov.array() > 0.0).all())) throw std::invalid_argument("sample_gaussian: variances must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Vector sd = diag_cov.array().sqrt();
  Matrix pts(n, mean.size());
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < mean.size(); ++j) pts(i, j) = mean[j] + sd[j] * normal(rng);
  }
  return SampleSet(std::move(pts), "gaussian");
}

EvalReport evaluate_solution(const ConstraintModel& model, const Vector& x, const SampleSet& eval_sample,
                             double alpha, std::uint64_t seed) {
  const auto vals = constraint_values(model, x, eval_sample);
  EvalReport r;
  r.cvar_out = empirical_cvar(vals, alpha);
  r.var_out = empirical_var(vals, alpha);
  r.violation_prob =
      static_cast<double>(std::count_if(vals.begin(), vals.end(), [](double v) { return v > 0.0; })) /
      static_cast<double>(vals.size());
  r.n_eval = eval_sample.size();
  r.seed = seed;
  return r;
}

}  // namespace mmd_drccp
