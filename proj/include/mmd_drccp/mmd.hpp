#pragma once

#include "mmd_drccp/common.hpp"
#include "mmd_drccp/kernels.hpp"

#include <string>
#include <vector>

namespace mmd_drccp {

enum class RadiusMethod { RateBound, Bootstrap, Fixed };
enum class RadiusScale { MmdSquared, Mmd };

/// Ambiguity-ball radius epsilon plus where it came from.
struct AmbiguityRadius {
  double value = 0.0;
  RadiusMethod method = RadiusMethod::Fixed;
  double confidence = 0.0;  // delta for RateBound, beta for Bootstrap
  RadiusScale scale = RadiusScale::MmdSquared;

  static AmbiguityRadius fixed(double value, RadiusScale scale = RadiusScale::MmdSquared);
  void validate() const;
};

struct BootstrapConfig {
  int replicates = 1000;
  double beta = 0.95;
  std::uint64_t rng_seed = 0;
  RadiusScale scale = RadiusScale::MmdSquared;

  void validate() const;
};

/// Biased (V-statistic) squared MMD between two samples; clamped at zero.
double mmd_sq_biased(const SampleSet& X, const SampleSet& Y, const KernelSpec& spec);

/// Same statistic before clamping; exposed for the rounding-artifact check.
double mmd_sq_biased_unclamped(const SampleSet& X, const SampleSet& Y, const KernelSpec& spec);

/// Concentration radius sqrt(C/N) + sqrt(2 C log(1/delta) / N).
double rate_radius(long long N, double delta, double C);

AmbiguityRadius rate_radius(long long N, double delta, const KernelSpec& spec);

/// Every bootstrap replicate statistic, sorted ascending. Replicate m draws its
/// resample from the RNG substream derive_seed(cfg.rng_seed, m), so the output
/// does not depend on evaluation order.
std::vector<double> bootstrap_statistics(const SampleSet& sample, const KernelSpec& spec,
                                         const BootstrapConfig& cfg);

/// 1-based ceil(B * beta) entry of the sorted replicate statistics.
double bootstrap_quantile(const std::vector<double>& sorted_stats, double beta);

AmbiguityRadius bootstrap_radius(const SampleSet& sample, const KernelSpec& spec,
                                 const BootstrapConfig& cfg);

/// ceil(x) robust to representation error in products such as 0.95 * 1000.
long long robust_ceil(double x);

// Sample CSV: one row per sample, numeric columns, optional header row.
SampleSet load_samples_csv(const std::string& path);
void write_samples_csv(const std::string& path, const SampleSet& sample);

std::string to_string(RadiusMethod method);
std::string to_string(RadiusScale scale);

}  // namespace mmd_drccp
