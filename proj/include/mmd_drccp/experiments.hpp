#pragma once

#include "mmd_drccp/drccp.hpp"
#include "mmd_drccp/risk.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mmd_drccp {

enum class SolvePath { Cvar, Mip, Tractable };
std::string to_string(SolvePath path);

struct GeneratorSpec {
  Vector mean;
  Vector diag_cov;
  Index n = 0;
  std::uint64_t seed = 0;
};

struct ProblemConfig {
  Vector cost;
  Sense sense = Sense::Minimize;
  Matrix G;
  Vector d;
  std::optional<ConstraintModel> model;
  double alpha = 0.1;
  SolvePath path = SolvePath::Cvar;
  bool t_nonneg = false;
  double offset = 0.0;

  DrccpProblem build() const;
};

struct KernelConfig {
  KernelFamily family = KernelFamily::Gaussian;
  std::optional<double> bandwidth;  // empty: median heuristic
  double C = 1.0;

  /// Resolves the median heuristic against `sample` when needed.
  KernelSpec resolve(const SampleSet& sample) const;
};

struct RadiusConfig {
  RadiusMethod method = RadiusMethod::Bootstrap;
  double delta = 0.05;
  double beta = 0.95;
  int B = 1000;
  RadiusScale scale = RadiusScale::MmdSquared;
  double value = 0.0;  // fixed method
  std::uint64_t seed = 0;
};

struct DataConfig {
  std::optional<Matrix> inline_samples;
  std::optional<std::string> csv;
  std::optional<GeneratorSpec> generator;

  /// The training sample described by the block (exactly one source).
  SampleSet load() const;
};

struct SolverConfig {
  SolverTolerances tol;
  int max_binaries = 20;
  std::optional<double> big_M;
};

struct ExperimentConfig {
  std::vector<std::uint64_t> seeds;
  std::vector<Index> N;
  Index eval_size = 100000;
};

struct RunConfig {
  std::string origin;
  std::optional<ProblemConfig> problem;
  KernelConfig kernel;
  RadiusConfig radius;
  std::optional<DataConfig> data;
  std::optional<SupportPolytope> support;
  SolverConfig solver;
  ExperimentConfig experiment;
};

/// Parses a YAML (or JSON) document. Errors are ConfigError with messages of
/// the form "origin:line:column: what".
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);

AmbiguityRadius compute_radius(const RadiusConfig& cfg, const SampleSet& sample, const KernelSpec& spec);

// ---- results files ------------------------------------------------------

inline constexpr const char* kResultsVersionLine = "# mmd_drccp results v1";
inline constexpr const char* kResultsHeader =
    "seed,N_train,method,epsilon,objective,cvar_out,var_out,violation_prob,status";

struct ResultRow {
  std::uint64_t seed = 0;
  Index N_train = 0;
  std::string method;
  double epsilon = 0.0;
  double objective = 0.0;
  double cvar_out = 0.0;
  double var_out = 0.0;
  double violation_prob = 0.0;
  std::string status;
};

std::string format_double(double v);
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(std::istream& in);

struct SummaryRow {
  Index N_train = 0;
  std::string method;
  int runs = 0;
  double objective_mean = 0.0, objective_std = 0.0;
  double cvar_mean = 0.0, cvar_std = 0.0;
  double violation_mean = 0.0, violation_std = 0.0;
};

/// Per-(N, method) mean and sample standard deviation over seeds (Optimal rows only).
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

// ---- portfolio experiment -----------------------------------------------

struct PortfolioJob {
  std::uint64_t seed = 0;
  Index N = 0;
};

/// Seed of the training sample for (seed, N), of the bootstrap for (seed, N)
/// and of the evaluation sample for a seed.
std::uint64_t training_seed(std::uint64_t seed, Index N);
std::uint64_t bootstrap_seed(std::uint64_t seed, Index N);
std::uint64_t eval_seed(std::uint64_t seed);

/// Three rows (empirical, bootstrap, rate) for one (N, seed).
std::vector<ResultRow> run_portfolio_job(const RunConfig& cfg, const PortfolioJob& job);

/// All rows in (N, seed, method) order, computed on `jobs` worker threads.
std::vector<ResultRow> run_portfolio(const RunConfig& cfg, int jobs);

// ---- commands -----------------------------------------------------------

struct CommandOptions {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::int64_t> seed_override;
  int jobs = 1;
  std::string solution;  // eval only; defaults to <out>/solution.json
};

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitInfeasible = 2, kExitNumerical = 3 };

int cmd_radius(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_solve(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_eval(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_reproduce_portfolio(const CommandOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace mmd_drccp
