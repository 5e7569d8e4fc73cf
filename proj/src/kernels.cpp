#include "mmd_drccp/kernels.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

namespace mmd_drccp {

KernelSpec KernelSpec::gaussian(double bandwidth) {
  KernelSpec spec{KernelFamily::Gaussian, bandwidth, 1.0};
  spec.validate();
  return spec;
}

KernelSpec KernelSpec::linear_plus_one(double sup_bound) {
  KernelSpec spec{KernelFamily::LinearPlusOne, 0.0, sup_bound};
  spec.validate();
  return spec;
}

void KernelSpec::validate() const {
  if (family == KernelFamily::Gaussian) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
      throw std::invalid_argument("Gaussian kernel bandwidth must be positive and finite");
    }
    if (sup_bound != 1.0) {
      throw std::invalid_argument("Gaussian kernel sup_bound must be 1");
    }
  } else if (!(sup_bound > 0.0)) {
    throw std::invalid_argument("kernel sup_bound must be positive");
  }
}

namespace {

double eval_unchecked(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                      const Eigen::Ref<const Vector>& y) {
  if (spec.family == KernelFamily::Gaussian) {
    const double d2 = (x - y).squaredNorm();
    return std::exp(-d2 / (2.0 * spec.bandwidth * spec.bandwidth));
  }
  return x.dot(y) + 1.0;
}

}  // namespace

double kernel_eval(const KernelSpec& spec, Eigen::Ref<const Vector> x,
                   Eigen::Ref<const Vector> y) {
  if (x.size() != y.size() || x.size() == 0) {
    throw std::invalid_argument("kernel_eval: dimension mismatch");
  }
  return eval_unchecked(spec, x, y);
}

Matrix gram(const KernelSpec& spec, const SampleSet& rows, const SampleSet& cols) {
  spec.validate();
  if (rows.empty() || cols.empty()) {
    throw std::invalid_argument("gram: empty sample set");
  }
  if (rows.dim() != cols.dim()) {
    throw std::invalid_argument("gram: dimension mismatch");
  }
  const Matrix& X = rows.points();
  const Matrix& Y = cols.points();
  Matrix K(X.rows(), Y.rows());
  if (spec.family == KernelFamily::LinearPlusOne) {
    K.noalias() = X * Y.transpose();
    K.array() += 1.0;
    return K;
  }
  // Evaluated entrywise so that gram(A, A) is exactly symmetric.
  const double scale = 1.0 / (2.0 * spec.bandwidth * spec.bandwidth);
  for (Index j = 0; j < Y.rows(); ++j) {
    for (Index i = 0; i < X.rows(); ++i) {
      K(i, j) = std::exp(-(X.row(i) - Y.row(j)).squaredNorm() * scale);
    }
  }
  return K;
}

Matrix gram(const KernelSpec& spec, const SampleSet& sample) {
  return gram(spec, sample, sample);
}

double median_heuristic(const SampleSet& sample) {
  const Index n = sample.size();
  if (n < 2) {
    throw DegenerateSampleError("median_heuristic: need at least two samples");
  }
  const Matrix& X = sample.points();
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      dist.push_back((X.row(i) - X.row(j)).norm());
    }
  }
  // Even count: mean of the two middle order statistics.
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  if (!(median > 0.0)) {
    throw DegenerateSampleError("median_heuristic: median pairwise distance is zero");
  }
  return median;
}

PsdFactor psd_factor(const Matrix& K, double jitter) {
  if (K.rows() != K.cols()) {
    throw std::invalid_argument("psd_factor: matrix must be square");
  }
  if (jitter < 0.0) {
    throw std::invalid_argument("psd_factor: jitter must be nonnegative");
  }
  const Index n = K.rows();
  const double step = jitter > 0.0 ? jitter : 1e-10;
  constexpr int kMaxRungs = 12;

  double lambda = 0.0;
  for (int rung = 0; rung <= kMaxRungs; ++rung) {
    Matrix shifted = K;
    shifted.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() == Eigen::Success) {
      Matrix L = llt.matrixL();
      if (L.allFinite()) {
        return PsdFactor{std::move(L), lambda};
      }
    }
    lambda = (rung == 0) ? step : lambda * 10.0;
  }
  throw NumericalError("psd_factor: factorisation failed at maximum jitter (n=" +
                       std::to_string(n) + ")");
}

}  // namespace mmd_drccp

namespace mmd_drccp {

SpectralFactor spectral_factor(const Matrix& K, double rel_cutoff) {
  if (K.rows() != K.cols() || K.rows() == 0) {
    throw std::invalid_argument("spectral_factor: matrix must be square and nonempty");
  }
  if (!(rel_cutoff >= 0.0 && rel_cutoff < 1.0)) {
    throw std::invalid_argument("spectral_factor: rel_cutoff must be in [0,1)");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(K);
  if (es.info() != Eigen::Success) throw NumericalError("spectral_factor: eigendecomposition failed");
  const Vector& lam = es.eigenvalues();  // ascending
  const double top = lam.maxCoeff();
  if (!(top > 0.0)) throw NumericalError("spectral_factor: matrix has no positive eigenvalue");
  const double cut = rel_cutoff * top;
  Index first = 0;
  while (first < lam.size() && !(lam[first] > cut)) ++first;
  const Index r = lam.size() - first;

  SpectralFactor f;
  f.phi.resize(K.rows(), r);
  f.coef.resize(K.rows(), r);
  f.eigenvalues.resize(r);
  // largest eigenvalue first
  for (Index j = 0; j < r; ++j) {
    const Index src = lam.size() - 1 - j;
    const double l = lam[src];
    const double sq = std::sqrt(l);
    f.eigenvalues[j] = l;
    f.phi.col(j) = es.eigenvectors().col(src) * sq;
    f.coef.col(j) = es.eigenvectors().col(src) / sq;
  }
  return f;
}

}  // namespace mmd_drccp
