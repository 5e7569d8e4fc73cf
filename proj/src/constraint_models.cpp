#include "mmd_drccp/constraint_models.hpp"

#include <algorithm>
#include <cmath>

namespace mmd_drccp {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

LinExpr dot_x(const std::vector<int>& x_vars, const Vector& coef) {
  LinExpr e;
  for (Index j = 0; j < coef.size(); ++j) {
    if (coef[j] != 0.0) e.add(x_vars[static_cast<std::size_t>(j)], coef[j]);
  }
  return e;
}

}  // namespace

ConstraintModel::ConstraintModel(AffineInXi model, Index n, Index m) : model_(std::move(model)), n_(n), m_(m) {
  validate();
}
ConstraintModel::ConstraintModel(PiecewiseAffine model, Index n, Index m)
    : model_(std::move(model)), n_(n), m_(m) {
  validate();
}
ConstraintModel::ConstraintModel(QuadraticForm model, Index n) : model_(model), n_(n), m_(n) { validate(); }
ConstraintModel::ConstraintModel(BlackBox model, Index n, Index m) : model_(std::move(model)), n_(n), m_(m) {
  validate();
}

ConstraintModel ConstraintModel::constant(double value, Index n, Index m) {
  return ConstraintModel(AffineInXi{Matrix::Zero(m, n), Vector::Zero(m), Vector::Zero(n), value}, n, m);
}

void ConstraintModel::validate() const {
  if (n_ < 1 || m_ < 1) throw std::invalid_argument("ConstraintModel: dimensions must be >= 1");
  std::visit(overloaded{
                 [&](const AffineInXi& a) {
                   if (a.Ax.rows() != m_ || a.Ax.cols() != n_ || a.a0.size() != m_ || a.bx.size() != n_) {
                     throw std::invalid_argument("AffineInXi: coefficient shapes do not match (n, m)");
                   }
                 },
                 [&](const PiecewiseAffine& p) {
                   if (p.pieces.empty()) throw std::invalid_argument("PiecewiseAffine: need K >= 1 pieces");
                   for (const auto& piece : p.pieces) {
                     if (piece.A.rows() != n_ || piece.A.cols() != m_ || piece.bx.size() != n_) {
                       throw std::invalid_argument("PiecewiseAffine: piece shapes do not match (n, m)");
                     }
                   }
                 },
                 [&](const QuadraticForm& q) {
                   if (!(q.r > 0.0)) throw std::invalid_argument("QuadraticForm: r must be positive");
                 },
                 [&](const BlackBox& b) {
                   if (!b.f) throw std::invalid_argument("BlackBox: empty callable");
                 },
             },
             model_);
}

std::string ConstraintModel::kind() const {
  return std::visit(overloaded{
                        [](const AffineInXi&) { return std::string("affine"); },
                        [](const PiecewiseAffine&) { return std::string("piecewise_affine"); },
                        [](const QuadraticForm&) { return std::string("quadratic"); },
                        [](const BlackBox&) { return std::string("black_box"); },
                    },
                    model_);
}

bool ConstraintModel::is_affine_in_x() const {
  if (std::holds_alternative<AffineInXi>(model_)) return true;
  if (const auto* p = std::get_if<PiecewiseAffine>(&model_)) return p->pieces.size() == 1;
  return false;
}

std::pair<Vector, double> ConstraintModel::affine_in_x(const Vector& xi) const {
  if (xi.size() != m_) throw std::invalid_argument("affine_in_x: dimension mismatch");
  if (const auto* a = std::get_if<AffineInXi>(&model_)) {
    return {a->Ax.transpose() * xi + a->bx, a->a0.dot(xi) + a->b0};
  }
  if (const auto* p = std::get_if<PiecewiseAffine>(&model_); p && p->pieces.size() == 1) {
    const auto& piece = p->pieces.front();
    return {piece.A * xi + piece.bx, piece.b0};
  }
  throw UnsupportedModelError("model '" + kind() + "' is not affine in x for fixed xi");
}

SupportPolytope SupportPolytope::box(const Vector& lower, const Vector& upper) {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw std::invalid_argument("SupportPolytope::box: bad bounds");
  }
  const Index m = lower.size();
  SupportPolytope s;
  s.C = Matrix::Zero(2 * m, m);
  s.h = Vector(2 * m);
  for (Index j = 0; j < m; ++j) {
    s.C(j, j) = 1.0;
    s.h[j] = upper[j];
    s.C(m + j, j) = -1.0;
    s.h[m + j] = -lower[j];
  }
  return s;
}

void SupportPolytope::validate(Index m) const {
  if (C.rows() < 1 || C.cols() != m || h.size() != C.rows()) {
    throw std::invalid_argument("SupportPolytope: C must be p x m with p >= 1 and h of length p");
  }
}

bool SupportPolytope::contains(const Vector& xi, double tol) const {
  return ((C * xi - h).array() <= tol).all();
}

double evaluate(const ConstraintModel& model, const Vector& x, const Vector& xi) {
  if (x.size() != model.decision_dim() || xi.size() != model.uncertainty_dim()) {
    throw std::invalid_argument("evaluate: dimension mismatch");
  }
  return std::visit(overloaded{
                        [&](const AffineInXi& a) { return (a.Ax * x + a.a0).dot(xi) + a.bx.dot(x) + a.b0; },
                        [&](const PiecewiseAffine& p) {
                          double best = -std::numeric_limits<double>::infinity();
                          for (const auto& piece : p.pieces) {
                            best = std::max(best, x.dot(piece.A * xi) + piece.bx.dot(x) + piece.b0);
                          }
                          return best;
                        },
                        [&](const QuadraticForm& q) {
                          const double v = xi.dot(x);
                          return v * v - q.r;
                        },
                        [&](const BlackBox& b) { return b.f(x, xi); },
                    },
                    model.variant());
}

void emit_epigraph(const ConstraintModel& model, ConicProgram& builder, const std::vector<int>& x_vars,
                   const Vector& xi, int t_var, const LinExpr& rhs) {
  if (static_cast<Index>(x_vars.size()) != model.decision_dim() || xi.size() != model.uncertainty_dim()) {
    throw std::invalid_argument("emit_epigraph: dimension mismatch");
  }
  const LinExpr t = LinExpr::var(t_var);
  std::visit(overloaded{
                 [&](const AffineInXi& a) {
                   LinExpr f = dot_x(x_vars, a.Ax.transpose() * xi + a.bx);
                   f += a.a0.dot(xi) + a.b0;
                   builder.add_le(f + t - rhs);
                 },
                 [&](const PiecewiseAffine& p) {
                   for (const auto& piece : p.pieces) {
                     LinExpr f = dot_x(x_vars, piece.A * xi + piece.bx);
                     f += piece.b0;
                     builder.add_le(f + t - rhs);
                   }
                 },
                 [&](const QuadraticForm& q) {
                   // (xi'x)^2 <= w  with  w = rhs + r - t, as ||(2 xi'x, w - 1)|| <= w + 1.
                   LinExpr w = rhs - t;
                   w += q.r;
                   builder.add_le(-1.0 * w);
                   builder.add_soc({2.0 * dot_x(x_vars, xi), w - LinExpr(1.0)}, w + LinExpr(1.0));
                 },
                 [&](const BlackBox&) {
                   throw UnsupportedModelError(
                       "black-box constraints cannot be emitted into a convex program; use the MIP path "
                       "with a model affine in x");
                 },
             },
             model.variant());
  builder.add_le(-1.0 * rhs);
}

}  // namespace mmd_drccp
