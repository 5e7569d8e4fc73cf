#pragma once

#include "mmd_drccp/common.hpp"
#include "mmd_drccp/conic.hpp"

#include <functional>
#include <variant>
#include <vector>

namespace mmd_drccp {

/// f(x, xi) = (Ax x + a0)' xi + bx' x + b0, i.e. a(x)' xi + b(x) with a, b affine.
struct AffineInXi {
  Matrix Ax;  // m x n
  Vector a0;  // m
  Vector bx;  // n
  double b0 = 0.0;
};

/// One affine piece x' A xi + bx' x + b0.
struct AffinePiece {
  Matrix A;  // n x m
  Vector bx;
  double b0 = 0.0;
};

/// f(x, xi) = max_k x' A_k xi + b_k(x).
struct PiecewiseAffine {
  std::vector<AffinePiece> pieces;
};

/// f(x, xi) = (xi' x)^2 - r, r > 0.
struct QuadraticForm {
  double r = 1.0;
};

/// Evaluation-only constraint; usable for out-of-sample evaluation but not by
/// the convex builders.
struct BlackBox {
  std::function<double(const Vector& x, const Vector& xi)> f;
};

class ConstraintModel {
 public:
  using Variant = std::variant<AffineInXi, PiecewiseAffine, QuadraticForm, BlackBox>;

  ConstraintModel(AffineInXi model, Index n, Index m);
  ConstraintModel(PiecewiseAffine model, Index n, Index m);
  ConstraintModel(QuadraticForm model, Index n);
  ConstraintModel(BlackBox model, Index n, Index m);

  Index decision_dim() const { return n_; }
  Index uncertainty_dim() const { return m_; }
  const Variant& variant() const { return model_; }
  std::string kind() const;

  /// Constant-coefficient constructors used by tests and configs.
  static ConstraintModel constant(double value, Index n, Index m);

  /// For fixed xi, returns (coef, constant) with f(x, xi) = coef' x + constant.
  /// Only defined for models affine in x (AffineInXi, single-piece PiecewiseAffine).
  std::pair<Vector, double> affine_in_x(const Vector& xi) const;
  bool is_affine_in_x() const;

 private:
  void validate() const;
  Variant model_;
  Index n_;
  Index m_;
};

/// Xi = {xi : C xi <= h}.
struct SupportPolytope {
  Matrix C;  // p x m
  Vector h;  // p

  static SupportPolytope box(const Vector& lower, const Vector& upper);
  void validate(Index m) const;
  bool contains(const Vector& xi, double tol = 1e-12) const;
};

double evaluate(const ConstraintModel& model, const Vector& x, const Vector& xi);

/// Appends rows equivalent to  f(x, xi) + t <= rhs  and  0 <= rhs.
/// x_vars[j] is the program index of x_j; t_var is the program index of t.
void emit_epigraph(const ConstraintModel& model, ConicProgram& builder, const std::vector<int>& x_vars,
                   const Vector& xi, int t_var, const LinExpr& rhs);

}  // namespace mmd_drccp
