#include "mmd_drccp/conic.hpp"

#include "ipm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>

namespace mmd_drccp {

// ---------------------------------------------------------------- LinExpr

LinExpr LinExpr::var(int index, double coef) {
  LinExpr e;
  e.terms.emplace_back(index, coef);
  return e;
}

LinExpr& LinExpr::add(int index, double coef) {
  terms.emplace_back(index, coef);
  return *this;
}

LinExpr& LinExpr::operator+=(const LinExpr& other) {
  terms.insert(terms.end(), other.terms.begin(), other.terms.end());
  constant += other.constant;
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& other) {
  for (const auto& [i, c] : other.terms) terms.emplace_back(i, -c);
  constant -= other.constant;
  return *this;
}

LinExpr& LinExpr::operator*=(double scale) {
  for (auto& term : terms) term.second *= scale;
  constant *= scale;
  return *this;
}

LinExpr& LinExpr::normalize() {
  std::stable_sort(terms.begin(), terms.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<int, double>> merged;
  for (const auto& term : terms) {
    if (!merged.empty() && merged.back().first == term.first) {
      merged.back().second += term.second;
    } else {
      merged.push_back(term);
    }
  }
  std::erase_if(merged, [](const auto& t) { return t.second == 0.0; });
  terms = std::move(merged);
  return *this;
}

double LinExpr::evaluate(const Vector& z) const {
  double v = constant;
  for (const auto& [i, c] : terms) v += c * z[i];
  return v;
}

bool LinExpr::operator==(const LinExpr& other) const {
  return constant == other.constant && terms == other.terms;
}

LinExpr operator+(LinExpr lhs, const LinExpr& rhs) { return lhs += rhs; }
LinExpr operator-(LinExpr lhs, const LinExpr& rhs) { return lhs -= rhs; }
LinExpr operator*(double scale, LinExpr expr) { return expr *= scale; }

// ----------------------------------------------------------- ConicProgram

int ConicProgram::add_variable(std::string name) {
  names_.push_back(std::move(name));
  return num_vars() - 1;
}

int ConicProgram::add_variables(int count, const std::string& prefix) {
  const int first = num_vars();
  for (int k = 0; k < count; ++k) {
    add_variable(prefix.empty() ? std::string{} : prefix + "[" + std::to_string(k) + "]");
  }
  return first;
}

void ConicProgram::set_objective(LinExpr objective, Sense sense) {
  objective_ = std::move(objective.normalize());
  sense_ = sense;
}

void ConicProgram::add_eq(LinExpr expr) { eqs_.push_back(std::move(expr.normalize())); }

void ConicProgram::add_le(LinExpr expr) { les_.push_back(std::move(expr.normalize())); }

void ConicProgram::add_soc(std::vector<LinExpr> u, LinExpr s) {
  if (u.empty()) {
    throw std::invalid_argument("add_soc: cone vector must have dimension >= 1");
  }
  for (auto& ui : u) ui.normalize();
  socs_.push_back(SocConstraint{std::move(u), std::move(s.normalize())});
}

void ConicProgram::mark_binary(int index) {
  if (index < 0 || index >= num_vars()) {
    throw std::invalid_argument("mark_binary: variable index out of range");
  }
  if (std::find(binaries_.begin(), binaries_.end(), index) == binaries_.end()) {
    binaries_.push_back(index);
    std::sort(binaries_.begin(), binaries_.end());
  }
}

double ConicProgram::max_violation(const Vector& z) const {
  double worst = 0.0;
  for (const auto& e : eqs_) worst = std::max(worst, std::abs(e.evaluate(z)));
  for (const auto& e : les_) worst = std::max(worst, e.evaluate(z));
  for (const auto& c : socs_) {
    double sq = 0.0;
    for (const auto& u : c.u) {
      const double v = u.evaluate(z);
      sq += v * v;
    }
    worst = std::max(worst, std::sqrt(sq) - c.s.evaluate(z));
  }
  return worst;
}

void ConicProgram::validate() const {
  const int n = num_vars();
  auto check = [n](const LinExpr& e) {
    for (const auto& [i, c] : e.terms) {
      if (i < 0 || i >= n) throw std::invalid_argument("ConicProgram: variable index out of range");
      if (!std::isfinite(c)) throw std::invalid_argument("ConicProgram: non-finite coefficient");
    }
    if (!std::isfinite(e.constant)) throw std::invalid_argument("ConicProgram: non-finite constant");
  };
  check(objective_);
  for (const auto& e : eqs_) check(e);
  for (const auto& e : les_) check(e);
  for (const auto& c : socs_) {
    if (c.u.empty()) throw std::invalid_argument("ConicProgram: empty cone");
    check(c.s);
    for (const auto& u : c.u) check(u);
  }
  for (int b : binaries_) {
    if (b < 0 || b >= n) throw std::invalid_argument("ConicProgram: binary index out of range");
  }
}

bool ConicProgram::operator==(const ConicProgram& other) const {
  return names_ == other.names_ && objective_ == other.objective_ && sense_ == other.sense_ &&
         eqs_ == other.eqs_ && les_ == other.les_ && socs_ == other.socs_ &&
         binaries_ == other.binaries_;
}

// -------------------------------------------------------------- text dump

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string expr_text(const LinExpr& e) {
  std::string out = fmt(e.constant);
  for (const auto& [i, c] : e.terms) {
    out += ' ';
    out += std::to_string(i);
    out += ':';
    out += fmt(c);
  }
  return out;
}

[[noreturn]] void parse_fail(int line, const std::string& what) {
  throw std::invalid_argument("parse_program: line " + std::to_string(line) + ": " + what);
}

double parse_number(const std::string& token, int line) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (token.empty() || end != token.c_str() + token.size()) parse_fail(line, "bad number '" + token + "'");
  return v;
}

LinExpr parse_expr(std::istringstream& in, int line) {
  LinExpr e;
  std::string token;
  if (!(in >> token)) parse_fail(line, "missing constant");
  e.constant = parse_number(token, line);
  while (in >> token) {
    const auto colon = token.find(':');
    if (colon == std::string::npos) parse_fail(line, "expected index:coef, got '" + token + "'");
    const int index = static_cast<int>(parse_number(token.substr(0, colon), line));
    e.terms.emplace_back(index, parse_number(token.substr(colon + 1), line));
  }
  return e;
}

}  // namespace

std::string to_text(const ConicProgram& p) {
  std::ostringstream out;
  out << "conic_program v1\n";
  out << "vars " << p.num_vars() << '\n';
  for (int i = 0; i < p.num_vars(); ++i) {
    if (!p.name(i).empty()) out << "name " << i << ' ' << p.name(i) << '\n';
  }
  out << "objective " << (p.sense() == Sense::Minimize ? "min " : "max ") << expr_text(p.objective()) << '\n';
  for (const auto& e : p.eqs()) out << "eq " << expr_text(e) << '\n';
  for (const auto& e : p.les()) out << "le " << expr_text(e) << '\n';
  for (const auto& c : p.socs()) {
    out << "soc " << c.u.size() << '\n';
    out << "  s " << expr_text(c.s) << '\n';
    for (const auto& u : c.u) out << "  u " << expr_text(u) << '\n';
  }
  for (int b : p.binaries()) out << "binary " << b << '\n';
  out << "end\n";
  return out.str();
}

ConicProgram parse_program(const std::string& text) {
  ConicProgram p;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  bool header = false;
  bool ended = false;
  struct Pending {
    std::vector<LinExpr> u;
    LinExpr s;
    std::size_t remaining = 0;
    bool have_s = false;
  };
  std::optional<Pending> soc;
  std::vector<LinExpr> eqs, les;
  std::vector<SocConstraint> socs;
  std::vector<int> binaries;
  std::vector<std::string> names;
  LinExpr objective;
  Sense sense = Sense::Minimize;

  while (std::getline(lines, line)) {
    ++line_no;
    std::istringstream in(line);
    std::string key;
    if (!(in >> key)) continue;
    if (!header) {
      std::string version;
      in >> version;
      if (key != "conic_program" || version != "v1") parse_fail(line_no, "missing 'conic_program v1' header");
      header = true;
      continue;
    }
    if (ended) parse_fail(line_no, "content after 'end'");
    if (soc && key != "s" && key != "u") parse_fail(line_no, "incomplete soc block");
    if (key == "vars") {
      int n = 0;
      if (!(in >> n) || n < 0 || !names.empty()) parse_fail(line_no, "bad variable count");
      names.assign(static_cast<std::size_t>(n), std::string{});
    } else if (key == "name") {
      int i = 0;
      std::string name;
      if (!(in >> i >> name) || i < 0 || i >= static_cast<int>(names.size())) parse_fail(line_no, "bad name line");
      names[static_cast<std::size_t>(i)] = name;
    } else if (key == "objective") {
      std::string s;
      in >> s;
      if (s != "min" && s != "max") parse_fail(line_no, "objective sense must be min or max");
      sense = s == "min" ? Sense::Minimize : Sense::Maximize;
      objective = parse_expr(in, line_no);
    } else if (key == "eq") {
      eqs.push_back(parse_expr(in, line_no));
    } else if (key == "le") {
      les.push_back(parse_expr(in, line_no));
    } else if (key == "soc") {
      std::size_t dim = 0;
      if (!(in >> dim) || dim == 0) parse_fail(line_no, "bad cone dimension");
      soc = Pending{};
      soc->remaining = dim;
    } else if (key == "s") {
      if (!soc || soc->have_s) parse_fail(line_no, "unexpected 's' line");
      soc->s = parse_expr(in, line_no);
      soc->have_s = true;
    } else if (key == "u") {
      if (!soc || !soc->have_s || soc->remaining == 0) parse_fail(line_no, "unexpected 'u' line");
      soc->u.push_back(parse_expr(in, line_no));
      if (--soc->remaining == 0) {
        socs.push_back(SocConstraint{std::move(soc->u), std::move(soc->s)});
        soc.reset();
      }
    } else if (key == "binary") {
      int b = 0;
      if (!(in >> b)) parse_fail(line_no, "bad binary index");
      binaries.push_back(b);
    } else if (key == "end") {
      ended = true;
    } else {
      parse_fail(line_no, "unknown keyword '" + key + "'");
    }
  }
  if (!header || !ended) parse_fail(line_no, "truncated program");
  for (auto& name : names) p.add_variable(std::move(name));
  // Expressions were written normalised, so normalising again is the identity.
  p.set_objective(std::move(objective), sense);
  for (auto& e : eqs) p.add_eq(std::move(e));
  for (auto& e : les) p.add_le(std::move(e));
  for (auto& c : socs) p.add_soc(std::move(c.u), std::move(c.s));
  for (int b : binaries) p.mark_binary(b);
  p.validate();
  return p;
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

// ---------------------------------------------------------------- solving

namespace {

detail::StandardForm to_standard_form(const ConicProgram& p) {
  detail::StandardForm sf;
  const int n = p.num_vars();
  sf.c = Vector::Zero(n);
  const double sign = p.sense() == Sense::Maximize ? -1.0 : 1.0;
  for (const auto& [i, c] : p.objective().terms) sf.c[i] += sign * c;

  sf.A = Matrix::Zero(static_cast<Index>(p.eqs().size()), n);
  sf.b = Vector::Zero(static_cast<Index>(p.eqs().size()));
  for (std::size_t r = 0; r < p.eqs().size(); ++r) {
    const auto& e = p.eqs()[r];
    for (const auto& [i, c] : e.terms) sf.A(static_cast<Index>(r), i) += c;
    sf.b[static_cast<Index>(r)] = -e.constant;
  }

  Index rows = static_cast<Index>(p.les().size());
  for (const auto& c : p.socs()) rows += static_cast<Index>(c.u.size()) + 1;
  sf.G = Matrix::Zero(rows, n);
  sf.h = Vector::Zero(rows);
  sf.n_lin = static_cast<int>(p.les().size());
  Index r = 0;
  for (const auto& e : p.les()) {
    for (const auto& [i, c] : e.terms) sf.G(r, i) += c;
    sf.h[r] = -e.constant;
    ++r;
  }
  auto cone_row = [&](const LinExpr& e) {
    for (const auto& [i, c] : e.terms) sf.G(r, i) -= c;
    sf.h[r] = e.constant;
    ++r;
  };
  for (const auto& c : p.socs()) {
    sf.soc_dims.push_back(static_cast<int>(c.u.size()) + 1);
    cone_row(c.s);
    for (const auto& u : c.u) cone_row(u);
  }
  return sf;
}

}  // namespace

ConicSolution solve_continuous(const ConicProgram& program, const SolverTolerances& tol) {
  if (!program.binaries().empty()) {
    throw std::invalid_argument("solve_continuous: program has binary variables");
  }
  program.validate();
  const auto sf = to_standard_form(program);
  const auto res = detail::solve_standard_form(sf, tol);

  ConicSolution sol;
  sol.status = res.status;
  sol.iterations = res.iterations;
  sol.residuals.dual_infeas = res.dres;
  sol.residuals.gap = res.gap;
  if (res.status == SolveStatus::Optimal) {
    sol.primal = res.x;
    sol.objective_value = program.objective().evaluate(res.x);
    sol.residuals.primal_infeas = program.max_violation(res.x);
    if (!(sol.residuals.primal_infeas <= tol.feas)) {
      // Residual test passed in the scaled space but not on the original rows.
      sol.status = SolveStatus::NumericalFailure;
      sol.primal.resize(0);
    }
  } else {
    sol.residuals.primal_infeas = res.pres;
    if (res.status == SolveStatus::Infeasible) {
      sol.objective_value = program.sense() == Sense::Minimize ? std::numeric_limits<double>::infinity()
                                                               : -std::numeric_limits<double>::infinity();
    } else if (res.status == SolveStatus::Unbounded) {
      sol.objective_value = program.sense() == Sense::Minimize ? -std::numeric_limits<double>::infinity()
                                                               : std::numeric_limits<double>::infinity();
    } else {
      sol.objective_value = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return sol;
}

FixedProgram fix_variables(const ConicProgram& program, const std::map<int, double>& values) {
  FixedProgram out;
  const int n = program.num_vars();
  std::vector<int> remap(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    if (!values.count(i)) {
      remap[static_cast<std::size_t>(i)] = out.program.add_variable(program.name(i));
      out.kept.push_back(i);
    }
  }
  auto substitute = [&](const LinExpr& e) {
    LinExpr r(e.constant);
    for (const auto& [i, c] : e.terms) {
      const auto it = values.find(i);
      if (it != values.end()) {
        r.constant += c * it->second;
      } else {
        r.terms.emplace_back(remap[static_cast<std::size_t>(i)], c);
      }
    }
    return r;
  };
  constexpr double kConstTol = 1e-12;
  auto violated = [&](double amount) {
    // A constant row that fails is kept as the infeasible row  amount <= 0.
    out.program.add_le(LinExpr(amount));
    out.has_violated_constant_row = true;
  };

  out.program.set_objective(substitute(program.objective()), program.sense());
  for (const auto& e : program.eqs()) {
    LinExpr r = substitute(e);
    r.normalize();
    if (r.terms.empty()) {
      if (std::abs(r.constant) > kConstTol) violated(std::abs(r.constant));
    } else {
      out.program.add_eq(std::move(r));
    }
  }
  for (const auto& e : program.les()) {
    LinExpr r = substitute(e);
    r.normalize();
    if (r.terms.empty()) {
      if (r.constant > kConstTol) violated(r.constant);
    } else {
      out.program.add_le(std::move(r));
    }
  }
  for (const auto& c : program.socs()) {
    std::vector<LinExpr> u;
    bool constant = true;
    for (const auto& ui : c.u) {
      u.push_back(substitute(ui).normalize());
      constant = constant && u.back().terms.empty();
    }
    LinExpr s = substitute(c.s).normalize();
    constant = constant && s.terms.empty();
    if (constant) {
      double sq = 0.0;
      for (const auto& ui : u) sq += ui.constant * ui.constant;
      const double excess = std::sqrt(sq) - s.constant;
      if (excess > kConstTol) violated(excess);
    } else {
      out.program.add_soc(std::move(u), std::move(s));
    }
  }
  for (int b : program.binaries()) {
    if (!values.count(b)) out.program.mark_binary(remap[static_cast<std::size_t>(b)]);
  }
  return out;
}

ConicSolution solve_binary_enumerate(const ConicProgram& program, const SolverTolerances& tol,
                                     const EnumerationOptions& options) {
  program.validate();
  const auto& bins = program.binaries();
  const int nb = static_cast<int>(bins.size());
  if (nb == 0) return solve_continuous(program, tol);
  if (nb > options.max_binaries || nb > 62) {
    throw CapacityError("solve_binary_enumerate: " + std::to_string(nb) +
                        " binary variables exceed the enumeration cap of " +
                        std::to_string(options.max_binaries) + "; reduce the number of samples N");
  }

  // Rows touching only binary variables can be checked before any solve.
  std::vector<const LinExpr*> pure_eq, pure_le;
  auto is_pure = [&](const LinExpr& e) {
    return !e.terms.empty() && std::all_of(e.terms.begin(), e.terms.end(), [&](const auto& t) {
      return std::binary_search(bins.begin(), bins.end(), t.first);
    });
  };
  for (const auto& e : program.eqs()) {
    if (is_pure(e)) pure_eq.push_back(&e);
  }
  for (const auto& e : program.les()) {
    if (is_pure(e)) pure_le.push_back(&e);
  }

  ConicSolution best;
  best.status = SolveStatus::Infeasible;
  bool any_failure = false;
  bool any_unbounded = false;
  const double sign = program.sense() == Sense::Maximize ? -1.0 : 1.0;
  Vector z = Vector::Zero(program.num_vars());

  const unsigned long long leaves = 1ULL << nb;
  for (unsigned long long mask = 0; mask < leaves; ++mask) {
    std::map<int, double> values;
    for (int k = 0; k < nb; ++k) {
      // First binary is the most significant digit: lexicographic order.
      const double v = static_cast<double>((mask >> (nb - 1 - k)) & 1ULL);
      values[bins[static_cast<std::size_t>(k)]] = v;
      z[bins[static_cast<std::size_t>(k)]] = v;
    }
    if (options.prune) {
      bool ok = true;
      for (const auto* e : pure_eq) ok = ok && std::abs(e->evaluate(z)) <= 1e-9;
      for (const auto* e : pure_le) ok = ok && e->evaluate(z) <= 1e-9;
      if (!ok) {
        ++best.leaves_pruned;
        continue;
      }
    }
    const FixedProgram leaf = fix_variables(program, values);
    const ConicSolution sol = solve_continuous(leaf.program, tol);
    ++best.leaves_solved;
    best.iterations += sol.iterations;
    if (sol.status == SolveStatus::Unbounded) any_unbounded = true;
    if (sol.status == SolveStatus::NumericalFailure) any_failure = true;
    if (sol.status != SolveStatus::Optimal) continue;
    const bool better = !best.optimal() || sign * sol.objective_value < sign * best.objective_value;
    if (better) {
      Vector full = z;
      for (std::size_t k = 0; k < leaf.kept.size(); ++k) full[leaf.kept[k]] = sol.primal[static_cast<Index>(k)];
      best.status = SolveStatus::Optimal;
      best.primal = std::move(full);
      best.objective_value = program.objective().evaluate(best.primal);
      best.residuals = sol.residuals;
      best.residuals.primal_infeas = program.max_violation(best.primal);
    }
  }
  if (any_unbounded) {
    best.status = SolveStatus::Unbounded;
    best.primal.resize(0);
    best.objective_value = sign * -std::numeric_limits<double>::infinity();
  } else if (!best.optimal()) {
    best.status = any_failure ? SolveStatus::NumericalFailure : SolveStatus::Infeasible;
    best.objective_value = any_failure ? std::numeric_limits<double>::quiet_NaN()
                                       : sign * std::numeric_limits<double>::infinity();
  }
  return best;
}

}  // namespace mmd_drccp
