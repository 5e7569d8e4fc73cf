#pragma once

// Primal-dual interior-point method for
//
//   minimize c'x  subject to  A x = b,  G x + s = h,  s in K
//
// where K is a product of a nonnegative orthant (first n_lin rows) and
// second-order cones {(s0, s1) : ||s1|| <= s0} (remaining rows, in order).
// The iteration runs on the homogeneous self-dual embedding with
// Nesterov-Todd scaling and a Mehrotra predictor-corrector; Newton systems are
// reduced to dense normal equations.

#include "mmd_drccp/conic.hpp"

#include <vector>

namespace mmd_drccp::detail {

struct StandardForm {
  Vector c;
  Matrix A;
  Vector b;
  Matrix G;
  Vector h;
  int n_lin = 0;
  std::vector<int> soc_dims;

  Index num_vars() const { return c.size(); }
  Index num_cone_rows() const { return h.size(); }
};

struct IpmResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  Vector x, y, z, s;
  int iterations = 0;
  double pres = 0.0;
  double dres = 0.0;
  double gap = 0.0;
  double pcost = 0.0;
  double dcost = 0.0;
};

IpmResult solve_standard_form(const StandardForm& problem, const SolverTolerances& tol);

// Cone helpers, exposed for unit tests.
class ConeLayout {
 public:
  ConeLayout(int n_lin, std::vector<int> soc_dims);

  int n_lin() const { return n_lin_; }
  const std::vector<int>& soc_dims() const { return soc_dims_; }
  const std::vector<int>& soc_offsets() const { return soc_offsets_; }
  int degree() const { return n_lin_ + static_cast<int>(soc_dims_.size()); }
  int rows() const { return rows_; }

  /// Smallest eigenvalue (in the Jordan-algebra sense) over all cones.
  double min_eigenvalue(const Vector& u) const;
  Vector identity() const;
  Vector jordan_product(const Vector& u, const Vector& v) const;
  /// Solves u o x = d for x; u must be interior.
  Vector jordan_divide(const Vector& u, const Vector& d) const;
  /// Largest alpha with u + alpha d in the cone (u interior); +inf if unbounded.
  double max_step(const Vector& u, const Vector& d) const;

 private:
  int n_lin_;
  std::vector<int> soc_dims_;
  std::vector<int> soc_offsets_;
  int rows_;
};

/// Nesterov-Todd scaling W with W z = W^{-1} s.
class NtScaling {
 public:
  NtScaling(const ConeLayout& cones, const Vector& s, const Vector& z);
  static NtScaling identity(const ConeLayout& cones);

  Vector apply(const Vector& v) const;          // W v
  Vector apply_inverse(const Vector& v) const;  // W^{-1} v
  Matrix apply_inverse_rows(const Matrix& M) const;

 private:
  explicit NtScaling(const ConeLayout& cones) : cones_(&cones) {}
  const ConeLayout* cones_;
  Vector lin_w_;
  std::vector<double> eta_;
  std::vector<Vector> wbar_;
};

}  // namespace mmd_drccp::detail
