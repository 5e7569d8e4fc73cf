#include "mmd_drccp/experiments.hpp"

#include "logging.hpp"

#include "json.hpp"
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mmd_drccp {

std::string to_string(SolvePath path) {
  switch (path) {
    case SolvePath::Cvar: return "cvar";
    case SolvePath::Mip: return "mip";
    case SolvePath::Tractable: return "tractable";
  }
  return "unknown";
}

// ---- config parsing -----------------------------------------------------

namespace {

class Parser {
 public:
  Parser(std::string origin, fs::path base) : origin_(std::move(origin)), base_(std::move(base)) {}

  [[noreturn]] void fail(const YAML::Mark& mark, const std::string& what) const {
    std::ostringstream os;
    os << origin_;
    if (mark.line >= 0) os << ":" << mark.line + 1 << ":" << mark.column + 1;
    os << ": " << what;
    throw ConfigError(os.str());
  }
  [[noreturn]] void fail(const YAML::Node& node, const std::string& what) const { fail(node.Mark(), what); }

  // Rejects keys outside `allowed` so that typos do not pass silently.
  void check_keys(const YAML::Node& block, const std::string& name, const std::set<std::string>& allowed) const {
    if (!block.IsMap()) fail(block, "'" + name + "' must be a mapping");
    for (const auto& kv : block) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        fail(kv.first, "unknown key '" + name + "." + key + "' (expected one of: " + list + ")");
      }
    }
  }

  YAML::Node require(const YAML::Node& block, const std::string& key, const std::string& name) const {
    YAML::Node n = block[key];
    if (!n.IsDefined() || n.IsNull()) fail(block, "missing required key '" + name + "." + key + "'");
    return n;
  }

  double to_double(const YAML::Node& n, const std::string& name) const {
    if (!n.IsScalar()) fail(n, "'" + name + "' must be a number");
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      fail(n, "'" + name + "' must be a number, got '" + n.Scalar() + "'");
    }
  }

  long long to_int(const YAML::Node& n, const std::string& name) const {
    if (!n.IsScalar()) fail(n, "'" + name + "' must be an integer");
    try {
      return n.as<long long>();
    } catch (const YAML::Exception&) {
      fail(n, "'" + name + "' must be an integer, got '" + n.Scalar() + "'");
    }
  }

  bool to_bool(const YAML::Node& n, const std::string& name) const {
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      fail(n, "'" + name + "' must be true or false");
    }
  }

  std::string to_string(const YAML::Node& n, const std::string& name) const {
    if (!n.IsScalar()) fail(n, "'" + name + "' must be a string");
    return n.Scalar();
  }

  Vector to_vector(const YAML::Node& n, const std::string& name) const {
    if (n.IsScalar()) return Vector::Constant(1, to_double(n, name));
    if (!n.IsSequence()) fail(n, "'" + name + "' must be a list of numbers");
    Vector v(static_cast<Index>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i) v[static_cast<Index>(i)] = to_double(n[i], name);
    return v;
  }

  // List of rows; a flat list of numbers reads as a column (one value per row).
  Matrix to_matrix(const YAML::Node& n, const std::string& name) const {
    if (!n.IsSequence() || n.size() == 0) fail(n, "'" + name + "' must be a nonempty list of rows");
    const bool flat = !n[0].IsSequence();
    const Index rows = static_cast<Index>(n.size());
    const Index cols = flat ? 1 : static_cast<Index>(n[0].size());
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      const YAML::Node row = n[static_cast<std::size_t>(i)];
      if (flat) {
        M(i, 0) = to_double(row, name);
        continue;
      }
      if (!row.IsSequence() || static_cast<Index>(row.size()) != cols) {
        fail(row, "'" + name + "' rows must all have length " + std::to_string(cols));
      }
      for (Index j = 0; j < cols; ++j) M(i, j) = to_double(row[static_cast<std::size_t>(j)], name);
    }
    return M;
  }

  fs::path resolve_path(const std::string& p) const {
    fs::path path(p);
    return path.is_absolute() ? path : base_ / path;
  }

  const std::string& origin() const { return origin_; }

 private:
  std::string origin_;
  fs::path base_;
};

std::pair<Matrix, Vector> parse_rows(const Parser& ps, const YAML::Node& n, const std::string& name, Index dim) {
  if (n.IsScalar()) {
    const auto kind = n.Scalar();
    if (kind == "simplex") return DrccpProblem::simplex(dim);
    if (kind == "none" || kind == "free") return {Matrix(0, dim), Vector(0)};
    ps.fail(n, "'" + name + "' must be 'simplex', 'none', a {G, d} mapping or a {box} mapping");
  }
  if (n["box"]) {
    ps.check_keys(n, name, {"box"});
    const YAML::Node b = n["box"];
    ps.check_keys(b, name + ".box", {"lower", "upper"});
    const Vector lo = ps.to_vector(ps.require(b, "lower", name + ".box"), name + ".box.lower");
    const Vector hi = ps.to_vector(ps.require(b, "upper", name + ".box"), name + ".box.upper");
    if (lo.size() != dim || hi.size() != dim) ps.fail(b, "'" + name + ".box' bounds must have length " + std::to_string(dim));
    if ((lo.array() > hi.array()).any()) ps.fail(b, "'" + name + ".box' needs lower <= upper");
    const auto s = SupportPolytope::box(lo, hi);
    return {s.C, s.h};
  }
  const bool support = name == "support";
  const std::string mk = support ? "C" : "G";
  const std::string vk = support ? "h" : "d";
  ps.check_keys(n, name, {mk, vk});
  const YAML::Node mn = ps.require(n, mk, name);
  Matrix M = ps.to_matrix(mn, name + "." + mk);
  if (M.cols() != dim) {
    if (M.cols() == 1 && dim > 1 && static_cast<Index>(mn.size()) == dim) {
      M.transposeInPlace();
    } else {
      ps.fail(mn, "'" + name + "." + mk + "' must have " + std::to_string(dim) + " columns");
    }
  }
  const YAML::Node vn = ps.require(n, vk, name);
  const Vector v = ps.to_vector(vn, name + "." + vk);
  if (v.size() != M.rows()) ps.fail(vn, "'" + name + "." + vk + "' must have one entry per row of " + mk);
  return {M, v};
}

ConstraintModel parse_model(const Parser& ps, const YAML::Node& n, Index dim) {
  if (!n.IsMap()) ps.fail(n, "'problem.model' must be a mapping with a 'type'");
  const YAML::Node tn = ps.require(n, "type", "problem.model");
  const std::string type = ps.to_string(tn, "problem.model.type");
  if (type == "quadratic") {
    ps.check_keys(n, "problem.model", {"type", "r"});
    const double r = n["r"] ? ps.to_double(n["r"], "problem.model.r") : 1.0;
    if (!(r > 0.0)) ps.fail(n["r"], "'problem.model.r' must be positive");
    return ConstraintModel(QuadraticForm{r}, dim);
  }
  if (type == "constant") {
    ps.check_keys(n, "problem.model", {"type", "value", "dim"});
    const double v = ps.to_double(ps.require(n, "value", "problem.model"), "problem.model.value");
    const Index m = n["dim"] ? ps.to_int(n["dim"], "problem.model.dim") : 1;
    if (m < 1) ps.fail(n["dim"], "'problem.model.dim' must be >= 1");
    return ConstraintModel::constant(v, dim, m);
  }
  if (type == "affine") {
    ps.check_keys(n, "problem.model", {"type", "Ax", "a0", "bx", "b0"});
    const YAML::Node a0n = ps.require(n, "a0", "problem.model");
    AffineInXi a;
    a.a0 = ps.to_vector(a0n, "problem.model.a0");
    const Index m = a.a0.size();
    a.Ax = n["Ax"] ? ps.to_matrix(n["Ax"], "problem.model.Ax") : Matrix::Zero(m, dim);
    if (a.Ax.rows() != m || a.Ax.cols() != dim) {
      ps.fail(n["Ax"], "'problem.model.Ax' must be " + std::to_string(m) + " x " + std::to_string(dim));
    }
    a.bx = n["bx"] ? ps.to_vector(n["bx"], "problem.model.bx") : Vector::Zero(dim);
    if (a.bx.size() != dim) ps.fail(n["bx"], "'problem.model.bx' must have length " + std::to_string(dim));
    a.b0 = n["b0"] ? ps.to_double(n["b0"], "problem.model.b0") : 0.0;
    return ConstraintModel(std::move(a), dim, m);
  }
  if (type == "piecewise_affine") {
    ps.check_keys(n, "problem.model", {"type", "pieces"});
    const YAML::Node pn = ps.require(n, "pieces", "problem.model");
    if (!pn.IsSequence() || pn.size() == 0) ps.fail(pn, "'problem.model.pieces' must be a nonempty list");
    PiecewiseAffine pwa;
    Index m = -1;
    for (const auto& piece : pn) {
      ps.check_keys(piece, "problem.model.pieces[]", {"A", "bx", "b0"});
      AffinePiece p;
      const YAML::Node an = ps.require(piece, "A", "problem.model.pieces[]");
      p.A = ps.to_matrix(an, "problem.model.pieces[].A");
      if (p.A.rows() != dim) ps.fail(an, "piece matrix A must have " + std::to_string(dim) + " rows (one per decision)");
      if (m < 0) m = p.A.cols();
      if (p.A.cols() != m) ps.fail(an, "all pieces must share the uncertainty dimension");
      p.bx = piece["bx"] ? ps.to_vector(piece["bx"], "problem.model.pieces[].bx") : Vector::Zero(dim);
      if (p.bx.size() != dim) ps.fail(piece["bx"], "piece bx must have length " + std::to_string(dim));
      p.b0 = piece["b0"] ? ps.to_double(piece["b0"], "problem.model.pieces[].b0") : 0.0;
      pwa.pieces.push_back(std::move(p));
    }
    return ConstraintModel(std::move(pwa), dim, m);
  }
  ps.fail(tn, "unknown model type '" + type + "' (expected quadratic, affine, piecewise_affine or constant)");
}

ProblemConfig parse_problem(const Parser& ps, const YAML::Node& n) {
  ps.check_keys(n, "problem", {"cost", "sense", "decision_set", "model", "alpha", "path", "t_nonneg", "offset"});
  ProblemConfig p;
  p.cost = ps.to_vector(ps.require(n, "cost", "problem"), "problem.cost");
  const Index dim = p.cost.size();
  if (n["sense"]) {
    const auto s = ps.to_string(n["sense"], "problem.sense");
    if (s == "min" || s == "minimize") {
      p.sense = Sense::Minimize;
    } else if (s == "max" || s == "maximize") {
      p.sense = Sense::Maximize;
    } else {
      ps.fail(n["sense"], "'problem.sense' must be min or max");
    }
  }
  if (n["decision_set"]) {
    std::tie(p.G, p.d) = parse_rows(ps, n["decision_set"], "decision_set", dim);
  } else {
    p.G.resize(0, dim);
    p.d.resize(0);
  }
  p.model = parse_model(ps, ps.require(n, "model", "problem"), dim);
  if (n["alpha"]) {
    p.alpha = ps.to_double(n["alpha"], "problem.alpha");
    if (!(p.alpha > 0.0 && p.alpha < 1.0)) ps.fail(n["alpha"], "'problem.alpha' must be in (0,1)");
  }
  if (n["path"]) {
    const auto s = ps.to_string(n["path"], "problem.path");
    if (s == "cvar") {
      p.path = SolvePath::Cvar;
    } else if (s == "mip") {
      p.path = SolvePath::Mip;
    } else if (s == "tractable") {
      p.path = SolvePath::Tractable;
    } else {
      ps.fail(n["path"], "'problem.path' must be cvar, mip or tractable");
    }
  }
  if (n["t_nonneg"]) p.t_nonneg = ps.to_bool(n["t_nonneg"], "problem.t_nonneg");
  if (n["offset"]) p.offset = ps.to_double(n["offset"], "problem.offset");
  return p;
}

KernelConfig parse_kernel(const Parser& ps, const YAML::Node& n) {
  ps.check_keys(n, "kernel", {"family", "bandwidth", "C"});
  KernelConfig k;
  if (n["family"]) {
    const auto f = ps.to_string(n["family"], "kernel.family");
    if (f == "gaussian") {
      k.family = KernelFamily::Gaussian;
    } else if (f == "linear_plus_one" || f == "linear") {
      k.family = KernelFamily::LinearPlusOne;
    } else {
      ps.fail(n["family"], "'kernel.family' must be gaussian or linear_plus_one");
    }
  }
  if (n["bandwidth"]) {
    const YAML::Node b = n["bandwidth"];
    if (b.IsScalar() && b.Scalar() == "median") {
      k.bandwidth.reset();
    } else {
      k.bandwidth = ps.to_double(b, "kernel.bandwidth");
      if (!(*k.bandwidth > 0.0)) ps.fail(b, "'kernel.bandwidth' must be positive or 'median'");
    }
  }
  if (n["C"]) {
    k.C = ps.to_double(n["C"], "kernel.C");
    if (!(k.C > 0.0)) ps.fail(n["C"], "'kernel.C' must be positive");
  }
  if (k.family == KernelFamily::Gaussian && k.C != 1.0) ps.fail(n["C"], "the Gaussian kernel has C = 1");
  return k;
}

RadiusScale parse_scale(const Parser& ps, const YAML::Node& n) {
  const auto s = ps.to_string(n, "radius.scale");
  if (s == "mmd_squared") return RadiusScale::MmdSquared;
  if (s == "mmd") return RadiusScale::Mmd;
  ps.fail(n, "'radius.scale' must be mmd_squared or mmd");
}

RadiusConfig parse_radius(const Parser& ps, const YAML::Node& n) {
  ps.check_keys(n, "radius", {"method", "delta", "beta", "B", "scale", "value", "seed"});
  RadiusConfig r;
  if (n["method"]) {
    const auto m = ps.to_string(n["method"], "radius.method");
    if (m == "rate") {
      r.method = RadiusMethod::RateBound;
    } else if (m == "bootstrap") {
      r.method = RadiusMethod::Bootstrap;
    } else if (m == "fixed") {
      r.method = RadiusMethod::Fixed;
    } else {
      ps.fail(n["method"], "'radius.method' must be rate, bootstrap or fixed");
    }
  }
  if (n["delta"]) {
    r.delta = ps.to_double(n["delta"], "radius.delta");
    if (!(r.delta > 0.0 && r.delta < 1.0)) ps.fail(n["delta"], "'radius.delta' must be in (0,1)");
  }
  if (n["beta"]) {
    r.beta = ps.to_double(n["beta"], "radius.beta");
    if (!(r.beta > 0.0 && r.beta < 1.0)) ps.fail(n["beta"], "'radius.beta' must be in (0,1)");
  }
  if (n["B"]) {
    const long long B = ps.to_int(n["B"], "radius.B");
    if (B < 1 || B > 10000000) ps.fail(n["B"], "'radius.B' must be a positive integer");
    r.B = static_cast<int>(B);
  }
  if (n["scale"]) r.scale = parse_scale(ps, n["scale"]);
  if (n["value"]) {
    r.value = ps.to_double(n["value"], "radius.value");
    if (!(r.value >= 0.0)) ps.fail(n["value"], "'radius.value' must be >= 0");
  } else if (r.method == RadiusMethod::Fixed) {
    ps.fail(n, "fixed radius needs 'radius.value'");
  }
  if (n["seed"]) r.seed = static_cast<std::uint64_t>(ps.to_int(n["seed"], "radius.seed"));
  return r;
}

GeneratorSpec parse_generator(const Parser& ps, const YAML::Node& n) {
  ps.check_keys(n, "data.generator", {"mean", "diag_cov", "n", "seed"});
  GeneratorSpec g;
  const YAML::Node cn = ps.require(n, "diag_cov", "data.generator");
  g.diag_cov = ps.to_vector(cn, "data.generator.diag_cov");
  if (!(g.diag_cov.array() > 0.0).all()) ps.fail(cn, "'data.generator.diag_cov' entries must be positive");
  g.mean = n["mean"] ? ps.to_vector(n["mean"], "data.generator.mean") : Vector::Zero(g.diag_cov.size());
  if (g.mean.size() != g.diag_cov.size()) ps.fail(n["mean"], "'data.generator.mean' and 'diag_cov' lengths differ");
  if (n["n"]) {
    g.n = ps.to_int(n["n"], "data.generator.n");
    if (g.n < 1) ps.fail(n["n"], "'data.generator.n' must be >= 1");
  }
  if (n["seed"]) g.seed = static_cast<std::uint64_t>(ps.to_int(n["seed"], "data.generator.seed"));
  return g;
}

DataConfig parse_data(const Parser& ps, const YAML::Node& n) {
  ps.check_keys(n, "data", {"samples", "csv", "generator"});
  DataConfig d;
  int sources = 0;
  if (n["samples"]) {
    ++sources;
    d.inline_samples = ps.to_matrix(n["samples"], "data.samples");
  }
  if (n["csv"]) {
    ++sources;
    const fs::path p = ps.resolve_path(ps.to_string(n["csv"], "data.csv"));
    if (!fs::exists(p)) ps.fail(n["csv"], "sample file '" + p.string() + "' does not exist");
    d.csv = p.string();
  }
  if (n["generator"]) {
    ++sources;
    d.generator = parse_generator(ps, n["generator"]);
  }
  if (sources != 1) ps.fail(n, "'data' needs exactly one of samples, csv or generator");
  return d;
}

SupportPolytope parse_support(const Parser& ps, const YAML::Node& n, Index m) {
  auto [C, h] = parse_rows(ps, n, "support", m);
  return SupportPolytope{C, h};
}

SolverConfig parse_solver(const Parser& ps, const YAML::Node& n) {
  ps.check_keys(n, "solver", {"feas", "gap", "max_iters", "max_binaries", "big_M"});
  SolverConfig s;
  if (n["feas"]) s.tol.feas = ps.to_double(n["feas"], "solver.feas");
  if (n["gap"]) s.tol.gap = ps.to_double(n["gap"], "solver.gap");
  if (!(s.tol.feas > 0.0)) ps.fail(n["feas"], "'solver.feas' must be positive");
  if (!(s.tol.gap > 0.0)) ps.fail(n["gap"], "'solver.gap' must be positive");
  if (n["max_iters"]) {
    const long long it = ps.to_int(n["max_iters"], "solver.max_iters");
    if (it < 1 || it > 100000) ps.fail(n["max_iters"], "'solver.max_iters' must be in [1, 100000]");
    s.tol.max_iters = static_cast<int>(it);
  }
  if (n["max_binaries"]) {
    const long long mb = ps.to_int(n["max_binaries"], "solver.max_binaries");
    if (mb < 0 || mb > 62) ps.fail(n["max_binaries"], "'solver.max_binaries' must be in [0, 62]");
    s.max_binaries = static_cast<int>(mb);
  }
  if (n["big_M"]) {
    s.big_M = ps.to_double(n["big_M"], "solver.big_M");
    if (!(*s.big_M > 0.0)) ps.fail(n["big_M"], "'solver.big_M' must be positive");
  }
  return s;
}

ExperimentConfig parse_experiment(const Parser& ps, const YAML::Node& n) {
  ps.check_keys(n, "experiment", {"seeds", "N", "eval_size"});
  ExperimentConfig e;
  e.N = {25, 50, 100, 200, 500};
  for (std::uint64_t s = 0; s < 16; ++s) e.seeds.push_back(s);
  if (n["seeds"]) {
    const YAML::Node sn = n["seeds"];
    e.seeds.clear();
    if (sn.IsMap()) {
      ps.check_keys(sn, "experiment.seeds", {"count", "base"});
      const long long count = ps.to_int(ps.require(sn, "count", "experiment.seeds"), "experiment.seeds.count");
      const long long base = sn["base"] ? ps.to_int(sn["base"], "experiment.seeds.base") : 0;
      if (count < 1) ps.fail(sn, "'experiment.seeds.count' must be >= 1");
      for (long long i = 0; i < count; ++i) e.seeds.push_back(static_cast<std::uint64_t>(base + i));
    } else if (sn.IsSequence() && sn.size() > 0) {
      for (const auto& s : sn) e.seeds.push_back(static_cast<std::uint64_t>(ps.to_int(s, "experiment.seeds")));
    } else {
      ps.fail(sn, "'experiment.seeds' must be a nonempty list or {count, base}");
    }
  }
  if (n["N"]) {
    const YAML::Node nn = n["N"];
    if (!nn.IsSequence() || nn.size() == 0) ps.fail(nn, "'experiment.N' must be a nonempty list");
    e.N.clear();
    for (const auto& v : nn) {
      const long long N = ps.to_int(v, "experiment.N");
      if (N < 2) ps.fail(v, "'experiment.N' entries must be >= 2");
      e.N.push_back(static_cast<Index>(N));
    }
  }
  if (n["eval_size"]) {
    e.eval_size = ps.to_int(n["eval_size"], "experiment.eval_size");
    if (e.eval_size < 1) ps.fail(n["eval_size"], "'experiment.eval_size' must be >= 1");
  }
  return e;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
  fs::path base = fs::current_path();
  if (!origin.empty() && origin.front() != '<') base = fs::absolute(fs::path(origin)).parent_path();
  const Parser ps(origin, base);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    ps.fail(e.mark, e.msg);
  }
  if (!root.IsMap()) ps.fail(root, "configuration must be a mapping of blocks");
  ps.check_keys(root, "<root>", {"problem", "kernel", "radius", "data", "support", "solver", "experiment"});

  RunConfig cfg;
  cfg.origin = origin;
  if (root["problem"]) cfg.problem = parse_problem(ps, root["problem"]);
  if (root["kernel"]) cfg.kernel = parse_kernel(ps, root["kernel"]);
  if (root["radius"]) cfg.radius = parse_radius(ps, root["radius"]);
  if (root["data"]) cfg.data = parse_data(ps, root["data"]);
  if (root["support"]) {
    if (!cfg.problem) ps.fail(root["support"], "'support' needs a 'problem' block to fix the uncertainty dimension");
    cfg.support = parse_support(ps, root["support"], cfg.problem->model->uncertainty_dim());
  }
  if (root["solver"]) cfg.solver = parse_solver(ps, root["solver"]);
  cfg.experiment = parse_experiment(ps, root["experiment"] ? root["experiment"] : YAML::Node(YAML::NodeType::Map));

  if (cfg.problem && cfg.data && cfg.data->inline_samples &&
      cfg.data->inline_samples->cols() != cfg.problem->model->uncertainty_dim()) {
    ps.fail(root["data"]["samples"], "sample dimension " + std::to_string(cfg.data->inline_samples->cols()) +
                                         " does not match the model's uncertainty dimension " +
                                         std::to_string(cfg.problem->model->uncertainty_dim()));
  }
  if (cfg.problem && cfg.data && cfg.data->generator &&
      cfg.data->generator->mean.size() != cfg.problem->model->uncertainty_dim()) {
    ps.fail(root["data"]["generator"], "generator dimension does not match the model's uncertainty dimension");
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

DrccpProblem ProblemConfig::build() const {
  return DrccpProblem(cost, sense, G, d, *model, alpha);
}

KernelSpec KernelConfig::resolve(const SampleSet& sample) const {
  KernelSpec spec;
  if (family == KernelFamily::LinearPlusOne) {
    spec = KernelSpec::linear_plus_one(C);
  } else {
    spec = KernelSpec::gaussian(bandwidth ? *bandwidth : median_heuristic(sample));
    spec.sup_bound = C;
  }
  spec.validate();
  return spec;
}

SampleSet DataConfig::load() const {
  if (inline_samples) return SampleSet(*inline_samples, "inline");
  if (csv) return load_samples_csv(*csv);
  if (generator) {
    if (generator->n < 1) throw ConfigError("data.generator.n must be set to draw a training sample");
    return sample_gaussian(generator->mean, generator->diag_cov, generator->n, generator->seed);
  }
  throw ConfigError("data block has no source");
}

AmbiguityRadius compute_radius(const RadiusConfig& cfg, const SampleSet& sample, const KernelSpec& spec) {
  switch (cfg.method) {
    case RadiusMethod::RateBound:
      return rate_radius(sample.size(), cfg.delta, spec);
    case RadiusMethod::Bootstrap: {
      BootstrapConfig bc;
      bc.replicates = cfg.B;
      bc.beta = cfg.beta;
      bc.rng_seed = cfg.seed;
      bc.scale = cfg.scale;
      return bootstrap_radius(sample, spec, bc);
    }
    case RadiusMethod::Fixed:
      return AmbiguityRadius::fixed(cfg.value, cfg.scale);
  }
  throw ConfigError("unknown radius method");
}

// ---- results files ------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kResultsVersionLine << "\n" << kResultsHeader << "\n";
  for (const auto& r : rows) {
    out << r.seed << ',' << r.N_train << ',' << r.method << ',' << format_double(r.epsilon) << ','
        << format_double(r.objective) << ',' << format_double(r.cvar_out) << ',' << format_double(r.var_out) << ','
        << format_double(r.violation_prob) << ',' << r.status << "\n";
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kResultsVersionLine) {
    throw ConfigError("results CSV: missing version line '" + std::string(kResultsVersionLine) + "'");
  }
  if (!std::getline(in, line) || line != kResultsHeader) throw ConfigError("results CSV: unexpected header");
  std::vector<ResultRow> rows;
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw ConfigError("results CSV line " + std::to_string(lineno) + ": expected 9 fields");
    ResultRow r;
    try {
      r.seed = std::stoull(f[0]);
      r.N_train = std::stoll(f[1]);
      r.method = f[2];
      r.epsilon = std::strtod(f[3].c_str(), nullptr);
      r.objective = std::strtod(f[4].c_str(), nullptr);
      r.cvar_out = std::strtod(f[5].c_str(), nullptr);
      r.var_out = std::strtod(f[6].c_str(), nullptr);
      r.violation_prob = std::strtod(f[7].c_str(), nullptr);
      r.status = f[8];
    } catch (const std::exception&) {
      throw ConfigError("results CSV line " + std::to_string(lineno) + ": malformed number");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::vector<SummaryRow> out;
  std::map<std::pair<Index, std::string>, std::size_t> where;
  std::vector<std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.N_train, r.method);
    auto it = where.find(key);
    if (it == where.end()) {
      it = where.emplace(key, out.size()).first;
      SummaryRow s;
      s.N_train = r.N_train;
      s.method = r.method;
      out.push_back(s);
      groups.emplace_back();
    }
    if (r.status == "optimal") groups[it->second].push_back(&r);
  }
  auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = sd = 0.0;
    if (v.empty()) {
      mean = sd = std::nan("");
      return;
    }
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
  };
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::vector<double> obj, cv, vp;
    for (const auto* r : groups[k]) {
      obj.push_back(r->objective);
      cv.push_back(r->cvar_out);
      vp.push_back(r->violation_prob);
    }
    out[k].runs = static_cast<int>(obj.size());
    stats(obj, out[k].objective_mean, out[k].objective_std);
    stats(cv, out[k].cvar_mean, out[k].cvar_std);
    stats(vp, out[k].violation_mean, out[k].violation_std);
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "# mmd_drccp summary v1\n"
      << "N_train,method,runs,objective_mean,objective_std,cvar_out_mean,cvar_out_std,violation_prob_mean,"
         "violation_prob_std\n";
  for (const auto& s : rows) {
    out << s.N_train << ',' << s.method << ',' << s.runs << ',' << format_double(s.objective_mean) << ','
        << format_double(s.objective_std) << ',' << format_double(s.cvar_mean) << ',' << format_double(s.cvar_std)
        << ',' << format_double(s.violation_mean) << ',' << format_double(s.violation_std) << "\n";
  }
}

// ---- portfolio experiment -----------------------------------------------

std::uint64_t training_seed(std::uint64_t seed, Index N) {
  return derive_seed(derive_seed(seed, 1), static_cast<std::uint64_t>(N));
}
std::uint64_t bootstrap_seed(std::uint64_t seed, Index N) {
  return derive_seed(derive_seed(seed, 2), static_cast<std::uint64_t>(N));
}
std::uint64_t eval_seed(std::uint64_t seed) { return derive_seed(seed, 3); }

namespace {

ResultRow solve_and_evaluate(const DrccpProblem& prob, const ProblemConfig& pc, const SolverConfig& sc,
                             const SampleSet& train, const KernelSpec& spec, const AmbiguityRadius& eps,
                             const SampleSet& eval, const std::string& method, std::uint64_t seed) {
  ResultRow row;
  row.seed = seed;
  row.N_train = train.size();
  row.method = method;
  row.epsilon = eps.value;
  row.objective = row.cvar_out = row.var_out = row.violation_prob = std::nan("");
  try {
    const DrccpSolution sol = solve_cvar(prob, train, spec, eps, sc.tol, pc.offset);
    row.status = to_string(sol.status);
    if (sol.optimal()) {
      row.objective = sol.objective;
      const EvalReport rep = evaluate_solution(prob.model, sol.x, eval, prob.alpha, seed);
      row.cvar_out = rep.cvar_out;
      row.var_out = rep.var_out;
      row.violation_prob = rep.violation_prob;
    }
  } catch (const NumericalError& e) {
    logging::warn(std::string("seed ") + std::to_string(seed) + " N " + std::to_string(train.size()) + " " + method +
              ": " + e.what());
    row.status = to_string(SolveStatus::NumericalFailure);
  }
  return row;
}

}  // namespace

std::vector<ResultRow> run_portfolio_job(const RunConfig& cfg, const PortfolioJob& job) {
  if (!cfg.problem) throw ConfigError(cfg.origin + ": reproduce-portfolio needs a 'problem' block");
  if (!cfg.data || !cfg.data->generator) {
    throw ConfigError(cfg.origin + ": reproduce-portfolio needs 'data.generator' (mean, diag_cov)");
  }
  const auto& gen = *cfg.data->generator;
  const DrccpProblem prob = cfg.problem->build();
  const SampleSet train = sample_gaussian(gen.mean, gen.diag_cov, job.N, training_seed(job.seed, job.N));
  const KernelSpec spec = cfg.kernel.resolve(train);
  const SampleSet eval = sample_gaussian(gen.mean, gen.diag_cov, cfg.experiment.eval_size, eval_seed(job.seed));

  RadiusConfig boot = cfg.radius;
  boot.method = RadiusMethod::Bootstrap;
  boot.seed = bootstrap_seed(job.seed, job.N);
  RadiusConfig rate = cfg.radius;
  rate.method = RadiusMethod::RateBound;

  std::vector<ResultRow> rows;
  const std::vector<std::pair<std::string, AmbiguityRadius>> methods = {
      {"empirical", AmbiguityRadius::fixed(0.0)},
      {"bootstrap", compute_radius(boot, train, spec)},
      {"rate", compute_radius(rate, train, spec)},
  };
  for (const auto& [name, eps] : methods) {
    rows.push_back(solve_and_evaluate(prob, *cfg.problem, cfg.solver, train, spec, eps, eval, name, job.seed));
    logging::debug("seed " + std::to_string(job.seed) + " N " + std::to_string(job.N) + " " + name + " eps " +
               format_double(eps.value) + " -> " + rows.back().status);
  }
  return rows;
}

std::vector<ResultRow> run_portfolio(const RunConfig& cfg, int jobs) {
  std::vector<PortfolioJob> work;
  for (Index N : cfg.experiment.N) {
    for (std::uint64_t seed : cfg.experiment.seeds) work.push_back({seed, N});
  }
  std::vector<std::vector<ResultRow>> results(work.size());
  std::vector<std::exception_ptr> errors(work.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < work.size(); k = next++) {
      try {
        results[k] = run_portfolio_job(cfg, work[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(work.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::vector<ResultRow> rows;
  for (std::size_t k = 0; k < work.size(); ++k) {
    if (errors[k]) std::rethrow_exception(errors[k]);
    for (auto& r : results[k]) rows.push_back(std::move(r));
  }
  return rows;
}

// ---- commands -----------------------------------------------------------

namespace {

RunConfig load_with_override(const CommandOptions& opt) {
  if (opt.config.empty()) throw ConfigError("--config is required");
  RunConfig cfg = load_config(opt.config);
  if (opt.seed_override) {
    const auto s = static_cast<std::uint64_t>(*opt.seed_override);
    if (cfg.data && cfg.data->generator) cfg.data->generator->seed = s;
    cfg.radius.seed = s;
    cfg.experiment.seeds = {s};
  }
  return cfg;
}

fs::path ensure_out(const CommandOptions& opt) {
  fs::path out(opt.out_dir.empty() ? "." : opt.out_dir);
  fs::create_directories(out);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << text;
}

json radius_json(const AmbiguityRadius& eps, const RadiusConfig& rc, const SampleSet& sample, const KernelSpec& spec) {
  json j;
  j["epsilon"] = eps.value;
  j["method"] = to_string(eps.method);
  j["scale"] = to_string(eps.scale);
  j["N"] = sample.size();
  j["bandwidth"] = spec.family == KernelFamily::Gaussian ? json(spec.bandwidth) : json(nullptr);
  if (eps.method == RadiusMethod::Bootstrap) {
    j["B"] = rc.B;
    j["beta"] = rc.beta;
  } else if (eps.method == RadiusMethod::RateBound) {
    j["delta"] = rc.delta;
  }
  return j;
}

json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

// Runs `body`, mapping the error taxonomy onto exit codes.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UnsupportedModelError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DegenerateSampleError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

int status_exit(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return kExitOk;
    case SolveStatus::Infeasible:
    case SolveStatus::Unbounded: return kExitInfeasible;
    case SolveStatus::NumericalFailure: return kExitNumerical;
  }
  return kExitNumerical;
}

}  // namespace

int cmd_radius(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_with_override(opt);
    if (!cfg.data) throw ConfigError(opt.config + ": radius needs a 'data' block");
    const SampleSet sample = cfg.data->load();
    const KernelSpec spec = cfg.kernel.resolve(sample);
    const AmbiguityRadius eps = compute_radius(cfg.radius, sample, spec);
    const json j = radius_json(eps, cfg.radius, sample, spec);
    write_text(ensure_out(opt) / "radius.json", j.dump(2) + "\n");
    out << j.dump(2) << "\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_solve(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_with_override(opt);
    if (!cfg.problem) throw ConfigError(opt.config + ": solve needs a 'problem' block");
    if (!cfg.data) throw ConfigError(opt.config + ": solve needs a 'data' block");
    const ProblemConfig& pc = *cfg.problem;
    const DrccpProblem prob = pc.build();
    const SampleSet sample = cfg.data->load();
    if (sample.dim() != prob.model.uncertainty_dim()) {
      throw ConfigError(opt.config + ": sample dimension " + std::to_string(sample.dim()) +
                        " does not match the model's uncertainty dimension " +
                        std::to_string(prob.model.uncertainty_dim()));
    }
    if (pc.path == SolvePath::Tractable && prob.model.kind() != "piecewise_affine") {
      throw ConfigError(opt.config + ": the tractable path needs a piecewise_affine model, got '" + prob.model.kind() +
                        "'");
    }
    if (pc.path == SolvePath::Tractable && cfg.kernel.family != KernelFamily::LinearPlusOne) {
      logging::warn("the tractable path always uses the linear-plus-one kernel; kernel.family is ignored");
    }
    const KernelSpec spec = pc.path == SolvePath::Tractable ? KernelSpec::linear_plus_one(cfg.kernel.C)
                                                            : cfg.kernel.resolve(sample);
    const AmbiguityRadius eps = compute_radius(cfg.radius, sample, spec);

    DrccpSolution sol;
    switch (pc.path) {
      case SolvePath::Cvar:
        sol = solve_cvar(prob, sample, spec, eps, cfg.solver.tol, pc.offset);
        break;
      case SolvePath::Mip: {
        MipConfig mc;
        mc.big_M = cfg.solver.big_M;
        if (!mc.big_M) {
          throw ConfigError(opt.config + ": the mip path needs solver.big_M (suggested value for this sample: " +
                            format_double(suggest_big_m(prob, sample, cfg.solver.tol)) + ")");
        }
        mc.max_binaries = cfg.solver.max_binaries;
        sol = solve_mip(prob, sample, spec, eps, mc, cfg.solver.tol);
        break;
      }
      case SolvePath::Tractable: {
        if (!cfg.support) throw ConfigError(opt.config + ": the tractable path needs a 'support' block");
        TractableOptions to;
        to.t_nonneg = pc.t_nonneg;
        sol = solve_tractable(prob, *cfg.support, sample, eps, cfg.solver.tol, to);
        break;
      }
    }
    for (const auto& w : sol.warnings) logging::warn(w);

    json j;
    j["format"] = "mmd_drccp solution v1";
    j["status"] = to_string(sol.status);
    j["path"] = to_string(pc.path);
    j["N"] = sample.size();
    j["alpha"] = prob.alpha;
    j["radius"] = radius_json(eps, cfg.radius, sample, spec);
    j["epsilon"] = eps.value;
    j["iterations"] = sol.iterations;
    j["warnings"] = sol.warnings;
    if (sol.optimal()) {
      j["x"] = to_json(sol.x);
      j["objective"] = sol.objective;
      j["g0"] = sol.g0;
      j["gamma"] = to_json(sol.gamma);
      if (pc.path != SolvePath::Mip) j["t"] = sol.t;
      j["norm_g"] = sol.norm_g;
      j["risk_lhs"] = sol.risk_lhs;
      if (pc.path == SolvePath::Mip) j["mu"] = to_json(sol.mu);
    } else {
      j["x"] = nullptr;
      j["objective"] = nullptr;
    }
    write_text(ensure_out(opt) / "solution.json", j.dump(2) + "\n");
    out << "status " << to_string(sol.status);
    if (sol.optimal()) out << " objective " << format_double(sol.objective);
    out << "\n";
    return status_exit(sol.status);
  });
}

int cmd_eval(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_with_override(opt);
    if (!cfg.problem) throw ConfigError(opt.config + ": eval needs a 'problem' block");
    if (!cfg.data || !cfg.data->generator) {
      throw ConfigError(opt.config + ": eval needs 'data.generator' to draw the evaluation sample");
    }
    const fs::path sol_path = opt.solution.empty() ? fs::path(opt.out_dir) / "solution.json" : fs::path(opt.solution);
    std::ifstream f(sol_path);
    if (!f) throw ConfigError("solution record '" + sol_path.string() + "' not found");
    json j;
    try {
      j = json::parse(f);
    } catch (const json::parse_error& e) {
      throw ConfigError(sol_path.string() + ": " + e.what());
    }
    if (!j.contains("x") || j["x"].is_null()) {
      throw ConfigError(sol_path.string() + ": solution record has no decision (status " +
                        j.value("status", std::string("unknown")) + ")");
    }
    const DrccpProblem prob = cfg.problem->build();
    const Vector x = from_json(j["x"]);
    if (x.size() != prob.n()) throw ConfigError(sol_path.string() + ": decision length does not match the problem");

    const auto& gen = *cfg.data->generator;
    const std::uint64_t seed = eval_seed(gen.seed);
    const SampleSet eval = sample_gaussian(gen.mean, gen.diag_cov, cfg.experiment.eval_size, seed);
    const EvalReport rep = evaluate_solution(prob.model, x, eval, prob.alpha, seed);

    ResultRow row;
    row.seed = gen.seed;
    row.N_train = j.value("N", 0);
    row.method = j.contains("radius") ? j["radius"].value("method", std::string("fixed")) : "fixed";
    row.epsilon = j.value("epsilon", 0.0);
    row.objective = j["objective"].is_number() ? j["objective"].get<double>() : std::nan("");
    row.cvar_out = rep.cvar_out;
    row.var_out = rep.var_out;
    row.violation_prob = rep.violation_prob;
    row.status = j.value("status", std::string("unknown"));
    std::ostringstream csv;
    write_results_csv(csv, {row});
    write_text(ensure_out(opt) / "eval.csv", csv.str());
    out << "cvar_out " << format_double(rep.cvar_out) << " var_out " << format_double(rep.var_out)
        << " violation_prob " << format_double(rep.violation_prob) << " n_eval " << rep.n_eval << "\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_reproduce_portfolio(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_with_override(opt);
    if (opt.jobs < 1) throw ConfigError("--jobs must be >= 1");
    const auto rows = run_portfolio(cfg, opt.jobs);
    const fs::path dir = ensure_out(opt);
    std::ostringstream csv;
    write_results_csv(csv, rows);
    write_text(dir / "results.csv", csv.str());
    const auto summary = summarize(rows);
    std::ostringstream sum;
    write_summary_csv(sum, summary);
    write_text(dir / "summary.csv", sum.str());
    out << sum.str();
    return static_cast<int>(kExitOk);
  });
}

}  // namespace mmd_drccp
