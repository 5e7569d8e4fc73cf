#pragma once

#include "mmd_drccp/common.hpp"
#include "mmd_drccp/constraint_models.hpp"

#include <cstdint>
#include <vector>

namespace mmd_drccp {

/// CVaR_{1-alpha}: min_t (1/alpha) mean([v + t]_+) - t, in closed form
/// (upper alpha-tail mean, boundary atom weighted fractionally).
double empirical_cvar(std::vector<double> values, double alpha);

/// Order statistic at 1-based index ceil((1 - alpha) n).
double empirical_var(std::vector<double> values, double alpha);

/// Fraction of samples with f(x, xi) > 0.
double violation_probability(const ConstraintModel& model, const Vector& x, const SampleSet& eval_sample);

/// n draws from N(mean, diag(diag_cov)). Uses std::mt19937_64 seeded with
/// `seed` and std::normal_distribution, filling row by row.
SampleSet sample_gaussian(const Vector& mean, const Vector& diag_cov, Index n, std::uint64_t seed);

struct EvalReport {
  double cvar_out = 0.0;
  double var_out = 0.0;
  double violation_prob = 0.0;
  Index n_eval = 0;
  std::uint64_t seed = 0;
};

std::vector<double> constraint_values(const ConstraintModel& model, const Vector& x, const SampleSet& sample);

EvalReport evaluate_solution(const ConstraintModel& model, const Vector& x, const SampleSet& eval_sample,
                             double alpha, std::uint64_t seed = 0);

}  // namespace mmd_drccp
