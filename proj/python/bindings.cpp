#include "mmd_drccp/experiments.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace mmd_drccp;

namespace {

KernelSpec make_kernel(const std::string& family, std::optional<double> bandwidth, const SampleSet& sample) {
  if (family == "gaussian") return KernelSpec::gaussian(bandwidth ? *bandwidth : median_heuristic(sample));
  if (family == "linear_plus_one") return KernelSpec::linear_plus_one();
  throw std::invalid_argument("kernel family must be 'gaussian' or 'linear_plus_one'");
}

Sense parse_sense(const std::string& s) {
  if (s == "min") return Sense::Minimize;
  if (s == "max") return Sense::Maximize;
  throw std::invalid_argument("sense must be 'min' or 'max'");
}

py::dict solution_dict(const DrccpSolution& s) {
  py::dict d;
  d["status"] = to_string(s.status);
  d["optimal"] = s.optimal();
  d["epsilon"] = s.epsilon;
  d["iterations"] = s.iterations;
  d["warnings"] = s.warnings;
  if (s.optimal()) {
    d["x"] = s.x;
    d["objective"] = s.objective;
    d["g0"] = s.g0;
    d["gamma"] = s.gamma;
    d["t"] = s.t;
    d["norm_g"] = s.norm_g;
    d["risk_lhs"] = s.risk_lhs;
    if (s.mu.size() > 0) d["mu"] = s.mu;
  } else {
    d["x"] = py::none();
    d["objective"] = py::none();
  }
  return d;
}

DrccpProblem make_problem(const Vector& c, const std::string& sense, const Matrix& G, const Vector& d,
                          const ConstraintModel& model, double alpha) {
  Matrix g = G;
  if (g.size() == 0) g.resize(0, c.size());
  return DrccpProblem(c, parse_sense(sense), g, d, model, alpha);
}

using Command = int (*)(const CommandOptions&, std::ostream&, std::ostream&);

py::tuple run_command(Command fn, const std::string& config, const std::string& out_dir,
                      std::optional<std::int64_t> seed_override, int jobs, const std::string& solution) {
  CommandOptions opt;
  opt.config = config;
  opt.out_dir = out_dir;
  opt.seed_override = seed_override;
  opt.jobs = jobs;
  opt.solution = solution;
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = fn(opt, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "MMD distributionally robust chance-constrained programs";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<UnsupportedModelError>(m, "UnsupportedModelError", PyExc_ValueError);
  py::register_exception<DegenerateSampleError>(m, "DegenerateSampleError", PyExc_ValueError);
  py::register_exception<CapacityError>(m, "CapacityError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  // kernels and MMD
  m.def(
      "gram",
      [](const Matrix& X, std::optional<Matrix> Y, double bandwidth, const std::string& family) {
        const KernelSpec spec = make_kernel(family, bandwidth, SampleSet(X));
        return Y ? gram(spec, SampleSet(X), SampleSet(*Y)) : gram(spec, SampleSet(X));
      },
      py::arg("X"), py::arg("Y") = py::none(), py::arg("bandwidth") = 1.0, py::arg("family") = "gaussian");
  m.def(
      "median_heuristic", [](const Matrix& X) { return median_heuristic(SampleSet(X)); }, py::arg("X"));
  m.def(
      "mmd_sq_biased",
      [](const Matrix& X, const Matrix& Y, double bandwidth) {
        return mmd_sq_biased(SampleSet(X), SampleSet(Y), KernelSpec::gaussian(bandwidth));
      },
      py::arg("X"), py::arg("Y"), py::arg("bandwidth"));
  m.def("rate_radius", py::overload_cast<long long, double, double>(&rate_radius), py::arg("N"), py::arg("delta"),
        py::arg("C") = 1.0);
  m.def(
      "bootstrap_radius",
      [](const Matrix& X, std::optional<double> bandwidth, int B, double beta, std::uint64_t seed,
         const std::string& scale) {
        BootstrapConfig cfg;
        cfg.replicates = B;
        cfg.beta = beta;
        cfg.rng_seed = seed;
        if (scale == "mmd") {
          cfg.scale = RadiusScale::Mmd;
        } else if (scale != "mmd_squared") {
          throw std::invalid_argument("scale must be 'mmd_squared' or 'mmd'");
        }
        const SampleSet S(X);
        return bootstrap_radius(S, make_kernel("gaussian", bandwidth, S), cfg).value;
      },
      py::arg("X"), py::arg("bandwidth") = py::none(), py::arg("B") = 1000, py::arg("beta") = 0.95,
      py::arg("seed") = 0, py::arg("scale") = "mmd_squared");
  m.def(
      "guarantee_bound", [](double M_f, double delta, long long N) { return guarantee_bound({M_f, delta, N}); },
      py::arg("M_f"), py::arg("delta"), py::arg("N"));

  // risk
  m.def("empirical_cvar", &empirical_cvar, py::arg("values"), py::arg("alpha"));
  m.def("empirical_var", &empirical_var, py::arg("values"), py::arg("alpha"));
  m.def(
      "sample_gaussian",
      [](const Vector& mean, const Vector& diag_cov, Index n, std::uint64_t seed) {
        return sample_gaussian(mean, diag_cov, n, seed).points();
      },
      py::arg("mean"), py::arg("diag_cov"), py::arg("n"), py::arg("seed"));

  // constraint models
  py::class_<ConstraintModel>(m, "ConstraintModel")
      .def_static(
          "quadratic", [](double r, Index n) { return ConstraintModel(QuadraticForm{r}, n); }, py::arg("r"),
          py::arg("n"))
      .def_static(
          "affine",
          [](const Matrix& Ax, const Vector& a0, const Vector& bx, double b0) {
            return ConstraintModel(AffineInXi{Ax, a0, bx, b0}, bx.size(), a0.size());
          },
          py::arg("Ax"), py::arg("a0"), py::arg("bx"), py::arg("b0"))
      .def_static(
          "piecewise_affine",
          [](const std::vector<std::tuple<Matrix, Vector, double>>& pieces) {
            if (pieces.empty()) throw std::invalid_argument("piecewise_affine needs at least one piece");
            PiecewiseAffine pw;
            for (const auto& [A, bx, b0] : pieces) pw.pieces.push_back({A, bx, b0});
            const auto& A0 = std::get<0>(pieces.front());
            return ConstraintModel(pw, A0.rows(), A0.cols());
          },
          py::arg("pieces"))
      .def_static("constant", &ConstraintModel::constant, py::arg("value"), py::arg("n"), py::arg("m"))
      .def_static(
          "black_box",
          [](std::function<double(const Vector&, const Vector&)> f, Index n, Index m) {
            return ConstraintModel(BlackBox{std::move(f)}, n, m);
          },
          py::arg("f"), py::arg("n"), py::arg("m"))
      .def_property_readonly("kind", &ConstraintModel::kind)
      .def_property_readonly("decision_dim", &ConstraintModel::decision_dim)
      .def_property_readonly("uncertainty_dim", &ConstraintModel::uncertainty_dim)
      .def(
          "__call__", [](const ConstraintModel& model, const Vector& x, const Vector& xi) { return evaluate(model, x, xi); },
          py::arg("x"), py::arg("xi"));

  m.def(
      "simplex",
      [](Index n) {
        auto [G, d] = DrccpProblem::simplex(n);
        return py::make_tuple(G, d);
      },
      py::arg("n"));
  m.def(
      "box",
      [](const Vector& lower, const Vector& upper) {
        auto [G, d] = DrccpProblem::box(lower, upper);
        return py::make_tuple(G, d);
      },
      py::arg("lower"), py::arg("upper"));

  // solvers
  m.def(
      "solve_cvar",
      [](const Vector& c, const std::string& sense, const Matrix& G, const Vector& d, const ConstraintModel& model,
         double alpha, const Matrix& samples, double epsilon, std::optional<double> bandwidth, double offset) {
        const SampleSet S(samples);
        const auto prob = make_problem(c, sense, G, d, model, alpha);
        const auto spec = make_kernel("gaussian", bandwidth, S);
        DrccpSolution sol;
        {
          py::gil_scoped_release release;
          sol = solve_cvar(prob, S, spec, AmbiguityRadius::fixed(epsilon), {}, offset);
        }
        return solution_dict(sol);
      },
      py::arg("c"), py::arg("sense"), py::arg("G"), py::arg("d"), py::arg("model"), py::arg("alpha"),
      py::arg("samples"), py::arg("epsilon"), py::arg("bandwidth") = py::none(), py::arg("offset") = 0.0);
  m.def(
      "solve_mip",
      [](const Vector& c, const std::string& sense, const Matrix& G, const Vector& d, const ConstraintModel& model,
         double alpha, const Matrix& samples, double epsilon, double big_M, std::optional<double> bandwidth,
         int max_binaries) {
        const SampleSet S(samples);
        const auto prob = make_problem(c, sense, G, d, model, alpha);
        const auto spec = make_kernel("gaussian", bandwidth, S);
        MipConfig mc;
        mc.big_M = big_M;
        mc.max_binaries = max_binaries;
        DrccpSolution sol;
        {
          py::gil_scoped_release release;
          sol = solve_mip(prob, S, spec, AmbiguityRadius::fixed(epsilon), mc);
        }
        return solution_dict(sol);
      },
      py::arg("c"), py::arg("sense"), py::arg("G"), py::arg("d"), py::arg("model"), py::arg("alpha"),
      py::arg("samples"), py::arg("epsilon"), py::arg("big_M"), py::arg("bandwidth") = py::none(),
      py::arg("max_binaries") = 20);
  m.def(
      "solve_tractable",
      [](const Vector& c, const std::string& sense, const Matrix& G, const Vector& d, const ConstraintModel& model,
         double alpha, const Matrix& samples, double epsilon, const Matrix& C, const Vector& h, bool t_nonneg) {
        const SampleSet S(samples);
        const auto prob = make_problem(c, sense, G, d, model, alpha);
        SupportPolytope support{C, h};
        TractableOptions opt;
        opt.t_nonneg = t_nonneg;
        DrccpSolution sol;
        {
          py::gil_scoped_release release;
          sol = solve_tractable(prob, support, S, AmbiguityRadius::fixed(epsilon), {}, opt);
        }
        return solution_dict(sol);
      },
      py::arg("c"), py::arg("sense"), py::arg("G"), py::arg("d"), py::arg("model"), py::arg("alpha"),
      py::arg("samples"), py::arg("epsilon"), py::arg("C"), py::arg("h"), py::arg("t_nonneg") = false);
  m.def(
      "evaluate_solution",
      [](const ConstraintModel& model, const Vector& x, const Matrix& eval_samples, double alpha) {
        const auto r = evaluate_solution(model, x, SampleSet(eval_samples), alpha);
        py::dict d;
        d["cvar_out"] = r.cvar_out;
        d["var_out"] = r.var_out;
        d["violation_prob"] = r.violation_prob;
        d["n_eval"] = r.n_eval;
        return d;
      },
      py::arg("model"), py::arg("x"), py::arg("eval_samples"), py::arg("alpha"));

  // command-line equivalents: return (exit_code, stdout, stderr)
  m.def(
      "cli_radius",
      [](const std::string& config, const std::string& out, std::optional<std::int64_t> seed) {
        return run_command(&cmd_radius, config, out, seed, 1, "");
      },
      py::arg("config"), py::arg("out") = ".", py::arg("seed_override") = py::none());
  m.def(
      "cli_solve",
      [](const std::string& config, const std::string& out, std::optional<std::int64_t> seed) {
        return run_command(&cmd_solve, config, out, seed, 1, "");
      },
      py::arg("config"), py::arg("out") = ".", py::arg("seed_override") = py::none());
  m.def(
      "cli_eval",
      [](const std::string& config, const std::string& out, std::optional<std::int64_t> seed,
         const std::string& solution) { return run_command(&cmd_eval, config, out, seed, 1, solution); },
      py::arg("config"), py::arg("out") = ".", py::arg("seed_override") = py::none(), py::arg("solution") = "");
  m.def(
      "cli_reproduce_portfolio",
      [](const std::string& config, const std::string& out, int jobs) {
        return run_command(&cmd_reproduce_portfolio, config, out, std::nullopt, jobs, "");
      },
      py::arg("config"), py::arg("out") = ".", py::arg("jobs") = 1);
}
