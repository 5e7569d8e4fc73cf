#pragma once

#include "mmd_drccp/common.hpp"

namespace mmd_drccp {

enum class KernelFamily { Gaussian, LinearPlusOne };

/// Kernel family plus parameters. sup_bound is the constant C with
/// sup_x k(x, x) <= C; it is 1 for the Gaussian kernel.
struct KernelSpec {
  KernelFamily family = KernelFamily::Gaussian;
  double bandwidth = 1.0;
  double sup_bound = 1.0;

  static KernelSpec gaussian(double bandwidth);
  static KernelSpec linear_plus_one(double sup_bound = 1.0);

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
};

double kernel_eval(const KernelSpec& spec, Eigen::Ref<const Vector> x,
                   Eigen::Ref<const Vector> y);

/// Dense Gram matrix, entry (i, j) = k(rows_i, cols_j).
Matrix gram(const KernelSpec& spec, const SampleSet& rows, const SampleSet& cols);
Matrix gram(const KernelSpec& spec, const SampleSet& sample);

/// Median of the pairwise Euclidean distances over distinct index pairs.
double median_heuristic(const SampleSet& sample);

struct PsdFactor {
  Matrix lower;         // L with L L^T = K + jitter * I
  double jitter = 0.0;  // the jitter that made the factorisation succeed
};

/// Cholesky factor of K + lambda I with lambda taken from the ladder
/// {0, jitter, 10 jitter, ...}. jitter == 0 falls back to 1e-10 for the
/// ladder steps after the first.
PsdFactor psd_factor(const Matrix& K, double jitter = 1e-10);

/// Truncated eigen-factor of a PSD matrix. Keeps eigenpairs with
/// lambda > rel_cutoff * lambda_max. With gamma = coef * u:
///   K gamma = phi * u  and  gamma' K gamma = ||u||^2
/// (exact on the kept subspace).
struct SpectralFactor {
  Matrix phi;   // N x r, V sqrt(Lambda)
  Matrix coef;  // N x r, V / sqrt(Lambda)
  Vector eigenvalues;
  Index rank() const { return phi.cols(); }
};

SpectralFactor spectral_factor(const Matrix& K, double rel_cutoff = 1e-10);

}  // namespace mmd_drccp
