#pragma once

#include "mmd_drccp/common.hpp"

#include <map>
#include <string>
#include <vector>

namespace mmd_drccp {

/// Affine expression sum_k coef_k * z[var_k] + constant.
struct LinExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  LinExpr() = default;
  explicit LinExpr(double c) : constant(c) {}
  static LinExpr var(int index, double coef = 1.0);

  LinExpr& add(int index, double coef);
  LinExpr& operator+=(const LinExpr& other);
  LinExpr& operator-=(const LinExpr& other);
  LinExpr& operator*=(double scale);
  LinExpr& operator+=(double c) {
    constant += c;
    return *this;
  }

  /// Sorts terms by index and merges duplicates; drops exact zeros.
  LinExpr& normalize();

  double evaluate(const Vector& z) const;
  bool operator==(const LinExpr& other) const;
};

LinExpr operator+(LinExpr lhs, const LinExpr& rhs);
LinExpr operator-(LinExpr lhs, const LinExpr& rhs);
LinExpr operator*(double scale, LinExpr expr);

enum class Sense { Minimize, Maximize };

/// ||u(z)||_2 <= s(z)
struct SocConstraint {
  std::vector<LinExpr> u;
  LinExpr s;
  bool operator==(const SocConstraint& other) const = default;
};

/// Solver-agnostic conic program. Equality rows read expr == 0, inequality
/// rows read expr <= 0.
class ConicProgram {
 public:
  int add_variable(std::string name = {});
  int add_variables(int count, const std::string& prefix = {});
  int num_vars() const { return static_cast<int>(names_.size()); }
  const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }

  void set_objective(LinExpr objective, Sense sense);
  const LinExpr& objective() const { return objective_; }
  Sense sense() const { return sense_; }

  void add_eq(LinExpr expr);
  void add_le(LinExpr expr);  // expr <= 0
  void add_le(LinExpr lhs, const LinExpr& rhs) { add_le(std::move(lhs) - rhs); }
  void add_soc(std::vector<LinExpr> u, LinExpr s);
  void mark_binary(int index);

  const std::vector<LinExpr>& eqs() const { return eqs_; }
  const std::vector<LinExpr>& les() const { return les_; }
  const std::vector<SocConstraint>& socs() const { return socs_; }
  const std::vector<int>& binaries() const { return binaries_; }

  /// Largest violation of any constraint at z (binary integrality excluded).
  double max_violation(const Vector& z) const;

  /// Throws std::invalid_argument if an index is out of range or a cone is empty.
  void validate() const;

  bool operator==(const ConicProgram& other) const;

 private:
  std::vector<std::string> names_;
  LinExpr objective_;
  Sense sense_ = Sense::Minimize;
  std::vector<LinExpr> eqs_;
  std::vector<LinExpr> les_;
  std::vector<SocConstraint> socs_;
  std::vector<int> binaries_;
};

/// Human-readable dump; parse_program(to_text(p)) == p.
std::string to_text(const ConicProgram& program);
ConicProgram parse_program(const std::string& text);

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };
std::string to_string(SolveStatus status);

struct SolverTolerances {
  double feas = 1e-8;
  double gap = 1e-8;  // used both as absolute and relative gap tolerance
  int max_iters = 100;
};

struct Residuals {
  double primal_infeas = 0.0;  // max absolute constraint violation of `primal`
  double dual_infeas = 0.0;    // relative dual residual of the interior-point iterate
  double gap = 0.0;            // absolute duality gap
};

struct ConicSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  Vector primal;  // empty unless status == Optimal
  double objective_value = 0.0;
  Residuals residuals;
  int iterations = 0;
  long long leaves_solved = 0;  // binary enumeration only
  long long leaves_pruned = 0;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

ConicSolution solve_continuous(const ConicProgram& program, const SolverTolerances& tol = {});

struct EnumerationOptions {
  int max_binaries = 20;
  bool prune = true;
};

ConicSolution solve_binary_enumerate(const ConicProgram& program, const SolverTolerances& tol = {},
                                     const EnumerationOptions& options = {});

/// The program with the given variables replaced by constants. Rows that become
/// constant are dropped when satisfied; violated constant rows are kept so the
/// backend reports infeasibility. Returns the reduced program and, for each
/// remaining variable, its index in the original program.
struct FixedProgram {
  ConicProgram program;
  std::vector<int> kept;
  bool has_violated_constant_row = false;
};
FixedProgram fix_variables(const ConicProgram& program, const std::map<int, double>& values);

}  // namespace mmd_drccp
