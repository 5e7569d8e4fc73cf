#include "ipm.hpp"

#include <cstdio>
#include <cstdlib>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace mmd_drccp::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// u0^2 - ||u1||^2 evaluated as a product to limit cancellation.
double soc_det(double u0, double u1_norm) { return (u0 - u1_norm) * (u0 + u1_norm); }

double smallest_positive_root(double a, double b, double c) {
  // Roots of a t^2 + 2 b t + c with c > 0.
  if (std::abs(a) < 1e-300) {
    return b < 0.0 ? -c / (2.0 * b) : kInf;
  }
  const double disc = b * b - a * c;
  if (disc < 0.0) return kInf;
  const double root = std::sqrt(disc);
  const double q = -(b + std::copysign(root, b));
  double best = kInf;
  if (q != 0.0) {
    const double r1 = q / a;
    const double r2 = c / q;
    if (r1 > 0.0) best = std::min(best, r1);
    if (r2 > 0.0) best = std::min(best, r2);
  }
  return best;
}

}  // namespace

ConeLayout::ConeLayout(int n_lin, std::vector<int> soc_dims)
    : n_lin_(n_lin), soc_dims_(std::move(soc_dims)), rows_(n_lin) {
  for (int d : soc_dims_) {
    soc_offsets_.push_back(rows_);
    rows_ += d;
  }
}

double ConeLayout::min_eigenvalue(const Vector& u) const {
  double lo = kInf;
  for (int i = 0; i < n_lin_; ++i) lo = std::min(lo, u[i]);
  for (std::size_t k = 0; k < soc_dims_.size(); ++k) {
    const int o = soc_offsets_[k];
    const int d = soc_dims_[k];
    lo = std::min(lo, u[o] - u.segment(o + 1, d - 1).norm());
  }
  return lo;
}

Vector ConeLayout::identity() const {
  Vector e = Vector::Zero(rows_);
  e.head(n_lin_).setOnes();
  for (int o : soc_offsets_) e[o] = 1.0;
  return e;
}

Vector ConeLayout::jordan_product(const Vector& u, const Vector& v) const {
  Vector w(rows_);
  w.head(n_lin_) = u.head(n_lin_).cwiseProduct(v.head(n_lin_));
  for (std::size_t k = 0; k < soc_dims_.size(); ++k) {
    const int o = soc_offsets_[k];
    const int d = soc_dims_[k];
    w[o] = u.segment(o, d).dot(v.segment(o, d));
    w.segment(o + 1, d - 1) = u[o] * v.segment(o + 1, d - 1) + v[o] * u.segment(o + 1, d - 1);
  }
  return w;
}

Vector ConeLayout::jordan_divide(const Vector& u, const Vector& d) const {
  Vector x(rows_);
  x.head(n_lin_) = d.head(n_lin_).cwiseQuotient(u.head(n_lin_));
  for (std::size_t k = 0; k < soc_dims_.size(); ++k) {
    const int o = soc_offsets_[k];
    const int dim = soc_dims_[k];
    const double u0 = u[o];
    const auto u1 = u.segment(o + 1, dim - 1);
    const auto d1 = d.segment(o + 1, dim - 1);
    const double det = soc_det(u0, u1.norm());
    const double x0 = (u0 * d[o] - u1.dot(d1)) / det;
    x[o] = x0;
    x.segment(o + 1, dim - 1) = (d1 - x0 * u1) / u0;
  }
  return x;
}

double ConeLayout::max_step(const Vector& u, const Vector& d) const {
  double alpha = kInf;
  for (int i = 0; i < n_lin_; ++i) {
    if (d[i] < 0.0) alpha = std::min(alpha, -u[i] / d[i]);
  }
  for (std::size_t k = 0; k < soc_dims_.size(); ++k) {
    const int o = soc_offsets_[k];
    const int dim = soc_dims_[k];
    const auto u1 = u.segment(o + 1, dim - 1);
    const auto d1 = d.segment(o + 1, dim - 1);
    const double a = soc_det(d[o], d1.norm());
    const double b = u[o] * d[o] - u1.dot(d1);
    const double c = std::max(soc_det(u[o], u1.norm()), 0.0);
    double step = smallest_positive_root(a, b, c);
    // Also stop before the wrong nappe of the cone.
    if (d[o] < 0.0) step = std::min(step, -u[o] / d[o]);
    alpha = std::min(alpha, step);
  }
  return alpha;
}

NtScaling::NtScaling(const ConeLayout& cones, const Vector& s, const Vector& z) : cones_(&cones) {
  const int nl = cones.n_lin();
  lin_w_ = (s.head(nl).array() / z.head(nl).array()).sqrt();
  const auto& dims = cones.soc_dims();
  const auto& offs = cones.soc_offsets();
  eta_.resize(dims.size());
  wbar_.resize(dims.size());
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const int o = offs[k];
    const int d = dims[k];
    const Vector sk = s.segment(o, d);
    const Vector zk = z.segment(o, d);
    const double s_nrm = std::sqrt(soc_det(sk[0], sk.tail(d - 1).norm()));
    const double z_nrm = std::sqrt(soc_det(zk[0], zk.tail(d - 1).norm()));
    const Vector sb = sk / s_nrm;
    const Vector zb = zk / z_nrm;
    const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
    Vector w(d);
    w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
    w.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * gamma);
    eta_[k] = std::sqrt(s_nrm / z_nrm);
    wbar_[k] = std::move(w);
  }
}

NtScaling NtScaling::identity(const ConeLayout& cones) {
  NtScaling W(cones);
  W.lin_w_ = Vector::Ones(cones.n_lin());
  for (int d : cones.soc_dims()) {
    W.eta_.push_back(1.0);
    Vector w = Vector::Zero(d);
    w[0] = 1.0;
    W.wbar_.push_back(std::move(w));
  }
  return W;
}

Vector NtScaling::apply(const Vector& v) const {
  const int nl = cones_->n_lin();
  Vector out(v.size());
  out.head(nl) = lin_w_.cwiseProduct(v.head(nl));
  const auto& dims = cones_->soc_dims();
  const auto& offs = cones_->soc_offsets();
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const int o = offs[k];
    const int d = dims[k];
    const Vector& w = wbar_[k];
    const auto v1 = v.segment(o + 1, d - 1);
    const double t = w.tail(d - 1).dot(v1);
    out[o] = eta_[k] * (w[0] * v[o] + t);
    out.segment(o + 1, d - 1) = eta_[k] * (v1 + (t / (1.0 + w[0]) + v[o]) * w.tail(d - 1));
  }
  return out;
}

Vector NtScaling::apply_inverse(const Vector& v) const {
  const int nl = cones_->n_lin();
  Vector out(v.size());
  out.head(nl) = v.head(nl).cwiseQuotient(lin_w_);
  const auto& dims = cones_->soc_dims();
  const auto& offs = cones_->soc_offsets();
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const int o = offs[k];
    const int d = dims[k];
    const Vector& w = wbar_[k];
    const auto v1 = v.segment(o + 1, d - 1);
    const double t = w.tail(d - 1).dot(v1);
    out[o] = (w[0] * v[o] - t) / eta_[k];
    out.segment(o + 1, d - 1) = (v1 + (t / (1.0 + w[0]) - v[o]) * w.tail(d - 1)) / eta_[k];
  }
  return out;
}

Matrix NtScaling::apply_inverse_rows(const Matrix& M) const {
  const int nl = cones_->n_lin();
  Matrix out(M.rows(), M.cols());
  out.topRows(nl) = lin_w_.cwiseInverse().asDiagonal() * M.topRows(nl);
  const auto& dims = cones_->soc_dims();
  const auto& offs = cones_->soc_offsets();
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const int o = offs[k];
    const int d = dims[k];
    const Vector& w = wbar_[k];
    const auto w1 = w.tail(d - 1);
    const auto B0 = M.row(o);
    const auto B1 = M.middleRows(o + 1, d - 1);
    const Eigen::RowVectorXd t = w1.transpose() * B1;
    out.row(o) = (w[0] * B0 - t) / eta_[k];
    out.middleRows(o + 1, d - 1) = (B1 + w1 * (t / (1.0 + w[0]) - B0)) / eta_[k];
  }
  return out;
}

namespace {

// Factored reduced Newton system
//   [ 0  A'  G'  ] [dx]   [r1]
//   [ A  0   0   ] [dy] = [r2]
//   [ G  0  -W^2 ] [dz]   [r3]
class KktSolver {
 public:
  KktSolver(const StandardForm& p, const NtScaling& W) : p_(p), W_(W) {}

  bool factor() {
    const Index n = p_.num_vars();
    const Index neq = p_.A.rows();
    const Matrix S = W_.apply_inverse_rows(p_.G);
    Matrix M = Matrix::Zero(n, n);
    if (S.rows() > 0) M.selfadjointView<Eigen::Lower>().rankUpdate(S.transpose());
    if (neq > 0) M.selfadjointView<Eigen::Lower>().rankUpdate(p_.A.transpose());
    // Regularise relative to each diagonal entry; near convergence the
    // diagonal spans many orders of magnitude.
    const Vector diag = M.diagonal();
    double delta = 1e-14;
    for (int attempt = 0; attempt < 8; ++attempt, delta *= 100.0) {
      Matrix Mr = M;
      Mr.diagonal().array() += delta * diag.array() + delta;
      llt_.compute(Mr.selfadjointView<Eigen::Lower>());
      if (llt_.info() != Eigen::Success) continue;
      if (neq == 0) return true;
      AtSolved_ = llt_.solve(p_.A.transpose());
      Matrix schur = p_.A * AtSolved_;
      const double sscale = std::max(1.0, schur.diagonal().maxCoeff());
      schur.diagonal().array() += 1e-13 * sscale;
      schur_.compute(schur);
      if (schur_.info() == Eigen::Success) return true;
    }
    return false;
  }

  void solve(const Vector& r1, const Vector& r2, const Vector& r3, Vector& dx, Vector& dy,
             Vector& dz) const {
    solve_once(r1, r2, r3, dx, dy, dz);
    double last = kInf;
    for (int it = 0; it < 10; ++it) {
      // Residual of the unregularised system.
      const Vector e1 = r1 - p_.A.transpose() * dy - p_.G.transpose() * dz;
      const Vector e2 = r2 - p_.A * dx;
      const Vector e3 = r3 - (p_.G * dx - W_.apply(W_.apply(dz)));
      const double err = std::max({e1.lpNorm<Eigen::Infinity>(), e2.size() ? e2.lpNorm<Eigen::Infinity>() : 0.0,
                                   e3.size() ? e3.lpNorm<Eigen::Infinity>() : 0.0});
      const double ref = 1.0 + std::max({r1.lpNorm<Eigen::Infinity>(), r2.size() ? r2.lpNorm<Eigen::Infinity>() : 0.0,
                                         r3.size() ? r3.lpNorm<Eigen::Infinity>() : 0.0});
      if (err <= 1e-15 * ref || err >= 0.9 * last) break;
      last = err;
      Vector cx, cy, cz;
      solve_once(e1, e2, e3, cx, cy, cz);
      dx += cx;
      dy += cy;
      dz += cz;
    }
  }

 private:
  void solve_once(const Vector& r1, const Vector& r2, const Vector& r3, Vector& dx, Vector& dy,
                  Vector& dz) const {
    const Vector t3 = W_.apply_inverse(W_.apply_inverse(r3));
    Vector rhs = r1 + p_.G.transpose() * t3;
    if (p_.A.rows() > 0) {
      rhs += p_.A.transpose() * r2;
      const Vector Minv_rhs = llt_.solve(rhs);
      dy = schur_.solve(p_.A * Minv_rhs - r2);
      dx = Minv_rhs - AtSolved_ * dy;
    } else {
      dy.resize(0);
      dx = llt_.solve(rhs);
    }
    dz = W_.apply_inverse(W_.apply_inverse(p_.G * dx - r3));
  }

  const StandardForm& p_;
  const NtScaling& W_;
  Eigen::LLT<Matrix> llt_;
  Eigen::LLT<Matrix> schur_;
  Matrix AtSolved_;
};

double safe_norm(const Vector& v) { return v.size() ? v.norm() : 0.0; }

struct Iterate {
  Vector x, y, z, s;
  double tau = 1.0;
  double kappa = 1.0;
};

struct Metrics {
  double pres, dres, gap, relgap, pcost, dcost, pinfres, dinfres;
  double pres_abs;  // max |residual| of the primal rows
  bool pinf_candidate, dinf_candidate;
};

}  // namespace

IpmResult solve_standard_form(const StandardForm& p, const SolverTolerances& tol) {
  const Index n = p.num_vars();
  const Index neq = p.A.rows();
  const ConeLayout cones(p.n_lin, p.soc_dims);
  const Index m = cones.rows();
  if (p.G.rows() != m || p.h.size() != m || p.G.cols() != n || p.A.cols() != n ||
      p.b.size() != neq) {
    throw std::invalid_argument("solve_standard_form: inconsistent dimensions");
  }
  const double D = static_cast<double>(cones.degree());
  const Vector e = cones.identity();
  const double norm_b = std::max(1.0, safe_norm(p.b));
  const double norm_h = std::max(1.0, safe_norm(p.h));
  const double norm_c = std::max(1.0, safe_norm(p.c));

  IpmResult result;
  Iterate it;

  // Starting point from two least-squares solves with W = I.
  {
    const NtScaling I = NtScaling::identity(cones);
    KktSolver kkt(p, I);
    if (!kkt.factor()) {
      result.status = SolveStatus::NumericalFailure;
      return result;
    }
    Vector dx, dy, dz;
    kkt.solve(Vector::Zero(n), p.b, p.h, dx, dy, dz);
    it.x = dx;
    it.s = p.h - p.G * dx;
    const double ap = -cones.min_eigenvalue(it.s);
    if (m > 0 && ap >= -1e-8) it.s += (1.0 + ap) * e;
    kkt.solve(-p.c, Vector::Zero(neq), Vector::Zero(m), dx, dy, dz);
    it.y = dy;
    it.z = dz;
    const double ad = -cones.min_eigenvalue(it.z);
    if (m > 0 && ad >= -1e-8) it.z += (1.0 + ad) * e;
  }

  auto metrics = [&](const Iterate& w) {
    Metrics mt{};
    const Vector ry = p.A * w.x - p.b * w.tau;
    const Vector rz = p.G * w.x + w.s - p.h * w.tau;
    const Vector hx = p.A.transpose() * w.y + p.G.transpose() * w.z;
    const Vector rx = hx + p.c * w.tau;
    const double cx = p.c.dot(w.x);
    const double by_hz = p.b.dot(w.y) + p.h.dot(w.z);
    mt.pres = std::max(safe_norm(ry) / norm_b, safe_norm(rz) / norm_h) / w.tau;
    mt.pres_abs = std::max(ry.size() ? ry.lpNorm<Eigen::Infinity>() : 0.0,
                           rz.size() ? rz.lpNorm<Eigen::Infinity>() : 0.0) / w.tau;
    mt.dres = safe_norm(rx) / norm_c / w.tau;
    mt.gap = (m ? w.s.dot(w.z) : 0.0) / (w.tau * w.tau);
    mt.pcost = cx / w.tau;
    mt.dcost = -by_hz / w.tau;
    mt.relgap = kInf;
    if (mt.pcost < 0.0) {
      mt.relgap = mt.gap / -mt.pcost;
    } else if (mt.dcost > 0.0) {
      mt.relgap = mt.gap / mt.dcost;
    }
    mt.pinf_candidate = by_hz < 0.0;
    mt.pinfres = mt.pinf_candidate ? safe_norm(hx) / -by_hz : kInf;
    mt.dinf_candidate = cx < 0.0;
    mt.dinfres = mt.dinf_candidate
                     ? std::max(safe_norm(p.A * w.x) / norm_b, safe_norm(p.G * w.x + w.s) / norm_h) / -cx
                     : kInf;
    return mt;
  };

  auto finish = [&](SolveStatus status, const Iterate& w, const Metrics& mt, int iters) {
    result.status = status;
    result.iterations = iters;
    result.pres = mt.pres;
    result.dres = mt.dres;
    result.gap = mt.gap;
    result.pcost = mt.pcost;
    result.dcost = mt.dcost;
    if (status == SolveStatus::Optimal) {
      result.x = w.x / w.tau;
      result.y = w.y / w.tau;
      result.z = w.z / w.tau;
      result.s = w.s / w.tau;
    } else {
      result.x = w.x;
      result.y = w.y;
      result.z = w.z;
      result.s = w.s;
    }
    return result;
  };

  const double inacc = 1e3;  // tolerance relaxation accepted when progress stalls
  auto converged = [&](const Metrics& mt, double scale) {
    return mt.pres < tol.feas * scale && mt.pres_abs < 0.5 * tol.feas * scale && mt.dres < tol.feas * scale &&
           (mt.gap < tol.gap * scale || mt.relgap < tol.gap * scale);
  };
  auto infeasible = [&](const Metrics& mt, const Iterate& w, double scale) {
    return mt.pinf_candidate && mt.pinfres < tol.feas * scale && w.kappa > w.tau * 1e-3;
  };
  auto unbounded = [&](const Metrics& mt, const Iterate& w, double scale) {
    return mt.dinf_candidate && mt.dinfres < tol.feas * scale && w.kappa > w.tau * 1e-3;
  };

  Iterate best = it;
  Metrics best_mt = metrics(it);
  auto merit = [](const Metrics& mt) { return std::max({mt.pres, mt.dres, std::min(mt.gap, mt.relgap)}); };

  const bool trace = std::getenv("MMD_DRCCP_IPM_TRACE") != nullptr;
  for (int iter = 0; iter <= tol.max_iters; ++iter) {
    const Metrics mt = metrics(it);
    if (trace) {
      std::fprintf(stderr, "%3d pcost %+.9e dcost %+.9e gap %.2e relgap %.2e pres %.2e dres %.2e k/t %.2e\n", iter,
                   mt.pcost, mt.dcost, mt.gap, mt.relgap, mt.pres, mt.dres, it.kappa / it.tau);
    }
    if (!std::isfinite(mt.pres) || !std::isfinite(mt.dres)) break;
    if (merit(mt) < merit(best_mt)) {
      best = it;
      best_mt = mt;
    }
    if (converged(mt, 1.0)) return finish(SolveStatus::Optimal, it, mt, iter);
    if (infeasible(mt, it, 1.0)) return finish(SolveStatus::Infeasible, it, mt, iter);
    if (unbounded(mt, it, 1.0)) return finish(SolveStatus::Unbounded, it, mt, iter);
    if (iter == tol.max_iters) break;

    const NtScaling W(cones, it.s, it.z);
    const Vector lambda = W.apply(it.z);
    KktSolver kkt(p, W);
    if (!kkt.factor()) break;

    const Vector rx = p.A.transpose() * it.y + p.G.transpose() * it.z + p.c * it.tau;
    const Vector ry = -(p.A * it.x) + p.b * it.tau;
    const Vector rz = -(p.G * it.x) + p.h * it.tau - it.s;
    const double rtau = -p.c.dot(it.x) - p.b.dot(it.y) - p.h.dot(it.z) - it.kappa;
    const double mu = ((m ? it.s.dot(it.z) : 0.0) + it.tau * it.kappa) / (D + 1.0);

    // Direction solving  K u = f + g dtau  for the two right-hand sides.
    Vector gx, gy, gz;
    kkt.solve(-p.c, p.b, p.h, gx, gy, gz);
    const double g_dot = p.c.dot(gx) + p.b.dot(gy) + p.h.dot(gz);

    struct Direction {
      Vector dx, dy, dz, ds;
      double dtau = 0.0, dkappa = 0.0;
    };
    auto direction = [&](double eta, const Vector& ds_target, double dkappa_target) {
      Direction d;
      const Vector lam_div = cones.jordan_divide(lambda, ds_target);
      Vector fx, fy, fz;
      kkt.solve(-eta * rx, eta * ry, eta * rz - W.apply(lam_div), fx, fy, fz);
      const double f_dot = p.c.dot(fx) + p.b.dot(fy) + p.h.dot(fz);
      d.dtau = (-eta * rtau + dkappa_target / it.tau + f_dot) / (it.kappa / it.tau - g_dot);
      d.dx = fx + d.dtau * gx;
      d.dy = fy + d.dtau * gy;
      d.dz = fz + d.dtau * gz;
      d.ds = W.apply(lam_div - W.apply(d.dz));
      d.dkappa = (dkappa_target - it.kappa * d.dtau) / it.tau;
      return d;
    };
    auto step_to_boundary = [&](const Direction& d) {
      double a = std::min(cones.max_step(it.s, d.ds), cones.max_step(it.z, d.dz));
      if (d.dtau < 0.0) a = std::min(a, -it.tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -it.kappa / d.dkappa);
      return a;
    };

    // Predictor.
    const Vector lam_sq = cones.jordan_product(lambda, lambda);
    const Direction aff = direction(1.0, -lam_sq, -it.tau * it.kappa);
    const double alpha_aff = std::min(1.0, step_to_boundary(aff));
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3.0), 0.0, 1.0);

    // Corrector with the second-order term.
    const Vector corr = cones.jordan_product(W.apply_inverse(aff.ds), W.apply(aff.dz));
    const Vector ds_target = -lam_sq + sigma * mu * e - corr;
    const double dk_target = -it.tau * it.kappa + sigma * mu - aff.dtau * aff.dkappa;
    const Direction cmb = direction(1.0 - sigma, ds_target, dk_target);
    double alpha = std::min(1.0, 0.99 * step_to_boundary(cmb));
    if (!std::isfinite(alpha) || alpha < 1e-12) break;

    Iterate next;
    for (int back = 0; back < 30; ++back, alpha *= 0.7) {
      next.x = it.x + alpha * cmb.dx;
      next.y = it.y + alpha * cmb.dy;
      next.z = it.z + alpha * cmb.dz;
      next.s = it.s + alpha * cmb.ds;
      next.tau = it.tau + alpha * cmb.dtau;
      next.kappa = it.kappa + alpha * cmb.dkappa;
      if ((m == 0 || (cones.min_eigenvalue(next.s) > 0.0 && cones.min_eigenvalue(next.z) > 0.0)) &&
          next.tau > 0.0 && next.kappa > 0.0) {
        break;
      }
    }
    it = std::move(next);
    result.iterations = iter + 1;
  }

  // Stalled or out of iterations. A certificate at a relaxed tolerance is
  // still reported; an inaccurate optimum is not.
  if (infeasible(best_mt, best, inacc)) return finish(SolveStatus::Infeasible, best, best_mt, result.iterations);
  if (unbounded(best_mt, best, inacc)) return finish(SolveStatus::Unbounded, best, best_mt, result.iterations);
  return finish(SolveStatus::NumericalFailure, best, best_mt, result.iterations);
}

}  // namespace mmd_drccp::detail
