#include "mmd_drccp/mmd.hpp"
#include "mmd_drccp/risk.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace mmd_drccp;

namespace {

SampleSet normal_sample(Index n, Index m, std::uint64_t seed, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(shift, 1.0);
  Matrix M(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) M(i, j) = nd(rng);
  return SampleSet(M);
}

}  // namespace

TEST(MmdSqBiased, IdenticalSamplesGiveZero) {
  const auto X = normal_sample(30, 2, 1);
  EXPECT_EQ(mmd_sq_biased(X, X, KernelSpec::gaussian(1.0)), 0.0);
}

TEST(MmdSqBiased, Singletons) {
  Matrix x(1, 2), y(1, 2);
  x << 0.0, 0.0;
  y << 0.6, 0.8;
  const double v = mmd_sq_biased(SampleSet(x), SampleSet(y), KernelSpec::gaussian(1.0));
  EXPECT_NEAR(v, 2.0 * (1.0 - std::exp(-0.5)), 1e-15);
  EXPECT_NEAR(v, 0.786939, 1e-6);
}

TEST(MmdSqBiased, SameDistributionMatchesDoubleLoop) {
  const auto X = normal_sample(50, 1, 11);
  const auto Y = normal_sample(50, 1, 12);
  const double v = mmd_sq_biased(X, Y, KernelSpec::gaussian(1.0));
  EXPECT_GT(v, 0.0);
  EXPECT_LT(v, 0.5);
  EXPECT_NEAR(v, oracle::naive_mmd_sq(X.points(), Y.points(), 1.0), 1e-12);
}

TEST(MmdSqBiased, DimensionMismatchThrows) {
  EXPECT_THROW(mmd_sq_biased(normal_sample(3, 1, 1), normal_sample(3, 2, 1), KernelSpec::gaussian(1.0)),
               std::invalid_argument);
}

TEST(MmdProperty, SymmetricAndNonnegative) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto X = normal_sample(10 + static_cast<Index>(s), 2, 2 * s);
    const auto Y = normal_sample(15, 2, 2 * s + 1, 0.1 * static_cast<double>(s % 4));
    const auto spec = KernelSpec::gaussian(0.5 + 0.1 * static_cast<double>(s));
    EXPECT_EQ(mmd_sq_biased(X, Y, spec), mmd_sq_biased(Y, X, spec));
    EXPECT_GE(mmd_sq_biased(X, Y, spec), 0.0);
    EXPECT_GE(mmd_sq_biased_unclamped(X, Y, spec), -1e-10);
  }
}

TEST(RateRadius, ReferenceValue) {
  // scalar evaluation of sqrt(C/N) + sqrt(2 C log(1/delta) / N)
  const double ref = 0.1 + std::sqrt(2.0 * std::log(20.0) / 100.0);
  EXPECT_NEAR(rate_radius(100, 0.05, 1.0), ref, 1e-12);
  EXPECT_NEAR(rate_radius(100, 0.05, 1.0), 0.344775, 1e-6);
}

TEST(RateRadius, DeltaNearOne) { EXPECT_NEAR(rate_radius(1, 1.0 - 1e-12, 1.0), 1.0, 1e-5); }

TEST(RateRadius, QuarterScaling) {
  EXPECT_EQ(rate_radius(400, 0.05, 1.0), rate_radius(100, 0.05, 1.0) / 2.0);
}

TEST(RateRadius, PreconditionsThrow) {
  EXPECT_THROW(rate_radius(0, 0.05, 1.0), std::invalid_argument);
  EXPECT_THROW(rate_radius(10, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(rate_radius(10, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(rate_radius(10, 0.05, 0.0), std::invalid_argument);
}

TEST(RateRadiusProperty, StrictMonotonicity) {
  for (long long N = 1; N < 2000; N = N * 3 + 1) {
    EXPECT_GT(rate_radius(N, 0.05, 1.0), rate_radius(N + 1, 0.05, 1.0));
  }
  for (double d = 0.9; d > 1e-6; d /= 3.0) {
    EXPECT_LT(rate_radius(50, d, 2.0), rate_radius(50, d / 3.0, 2.0));
  }
}

TEST(RateRadius, KernelSpecOverloadCarriesMetadata) {
  const auto r = rate_radius(100, 0.05, KernelSpec::gaussian(1.0));
  EXPECT_EQ(r.method, RadiusMethod::RateBound);
  EXPECT_DOUBLE_EQ(r.confidence, 0.05);
  EXPECT_EQ(r.value, rate_radius(100, 0.05, 1.0));
}

TEST(Bootstrap, SingleReplicateIsItsStatistic) {
  const auto X = normal_sample(20, 1, 3);
  const auto spec = KernelSpec::gaussian(1.0);
  for (double beta : {0.05, 0.5, 0.99}) {
    BootstrapConfig cfg;
    cfg.replicates = 1;
    cfg.beta = beta;
    cfg.rng_seed = 7;
    const auto stats = bootstrap_statistics(X, spec, cfg);
    ASSERT_EQ(stats.size(), 1u);
    EXPECT_EQ(bootstrap_radius(X, spec, cfg).value, stats[0]);
  }
}

TEST(Bootstrap, ConstantSampleGivesZero) {
  const SampleSet X(Matrix::Constant(10, 2, 0.3));
  BootstrapConfig cfg;
  cfg.replicates = 50;
  for (double s : bootstrap_statistics(X, KernelSpec::gaussian(1.0), cfg)) EXPECT_EQ(s, 0.0);
}

TEST(Bootstrap, ReplicateMatchesResampledMmd) {
  // Each statistic must be the biased MMD between the sample and some resample of it.
  // With N = 3 there are only 10 distinct multisets, so enumerate them.
  Matrix P(3, 1);
  P << 0.0, 0.7, 2.0;
  const SampleSet X(P);
  const auto spec = KernelSpec::gaussian(1.0);
  std::vector<double> possible;
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b)
      for (int c = b; c < 3; ++c) {
        Matrix R(3, 1);
        R << P(a, 0), P(b, 0), P(c, 0);
        possible.push_back(oracle::naive_mmd_sq(P, R, 1.0));
      }
  BootstrapConfig cfg;
  cfg.replicates = 200;
  cfg.rng_seed = 5;
  for (double s : bootstrap_statistics(X, spec, cfg)) {
    double best = 1e9;
    for (double p : possible) best = std::min(best, std::abs(p - s));
    EXPECT_LT(best, 1e-12);
  }
}

TEST(Bootstrap, QuantileIsOneBasedCeiling) {
  const std::vector<double> sorted = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  EXPECT_EQ(bootstrap_quantile(sorted, 0.95), 1.0);  // ceil(9.5) = 10
  EXPECT_EQ(bootstrap_quantile(sorted, 0.9), 0.9);   // ceil(9) = 9 despite 0.9 * 10 rounding
  EXPECT_EQ(bootstrap_quantile(sorted, 0.01), 0.1);
}

TEST(RobustCeil, ProductsOfDecimals) {
  EXPECT_EQ(robust_ceil(0.95 * 1000), 950);
  EXPECT_EQ(robust_ceil(0.9 * 10), 9);
  EXPECT_EQ(robust_ceil(9.5), 10);
  EXPECT_EQ(robust_ceil(3.0000001), 4);
}

TEST(BootstrapProperty, DeterministicAndOrderFree) {
  const auto X = normal_sample(40, 2, 8);
  const auto spec = KernelSpec::gaussian(median_heuristic(X));
  BootstrapConfig cfg;
  cfg.replicates = 300;
  cfg.rng_seed = 99;
  EXPECT_EQ(bootstrap_statistics(X, spec, cfg), bootstrap_statistics(X, spec, cfg));
  EXPECT_EQ(bootstrap_radius(X, spec, cfg).value, bootstrap_radius(X, spec, cfg).value);
  cfg.rng_seed = 100;
  const auto other = bootstrap_statistics(X, spec, cfg);
  cfg.rng_seed = 99;
  EXPECT_NE(bootstrap_statistics(X, spec, cfg), other);
}

TEST(BootstrapProperty, NondecreasingInBeta) {
  const auto X = normal_sample(30, 1, 21);
  const auto spec = KernelSpec::gaussian(median_heuristic(X));
  BootstrapConfig cfg;
  cfg.replicates = 200;
  cfg.rng_seed = 4;
  double prev = -1.0;
  for (double beta = 0.05; beta < 1.0; beta += 0.05) {
    cfg.beta = beta;
    const double v = bootstrap_radius(X, spec, cfg).value;
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Bootstrap, ScaleMmdIsSquareRoot) {
  const auto X = normal_sample(30, 1, 22);
  const auto spec = KernelSpec::gaussian(1.0);
  BootstrapConfig cfg;
  cfg.replicates = 100;
  const double sq = bootstrap_radius(X, spec, cfg).value;
  cfg.scale = RadiusScale::Mmd;
  const auto r = bootstrap_radius(X, spec, cfg);
  EXPECT_EQ(r.scale, RadiusScale::Mmd);
  EXPECT_DOUBLE_EQ(r.value, std::sqrt(sq));
}

TEST(Bootstrap, DefaultScaleIsSquared) {
  BootstrapConfig cfg;
  EXPECT_EQ(cfg.scale, RadiusScale::MmdSquared);
  const auto r = bootstrap_radius(normal_sample(10, 1, 1), KernelSpec::gaussian(1.0), cfg);
  EXPECT_EQ(r.scale, RadiusScale::MmdSquared);
  EXPECT_EQ(r.method, RadiusMethod::Bootstrap);
}

TEST(Bootstrap, InvalidConfigThrows) {
  const auto X = normal_sample(10, 1, 1);
  BootstrapConfig cfg;
  cfg.replicates = 0;
  EXPECT_THROW(bootstrap_radius(X, KernelSpec::gaussian(1.0), cfg), std::invalid_argument);
  cfg.replicates = 10;
  cfg.beta = 1.0;
  EXPECT_THROW(bootstrap_radius(X, KernelSpec::gaussian(1.0), cfg), std::invalid_argument);
}

// Population MMD^2 between N(0, 1) and the empirical distribution of x, Gaussian
// kernel with unit bandwidth:
//   E k(y, y') = 1/sqrt(3),  E_y k(x, y) = exp(-x^2 / 4) / sqrt(2).
double population_mmd_sq(const SampleSet& x) {
  const Matrix K = gram(KernelSpec::gaussian(1.0), x);
  double cross = 0.0;
  for (Index i = 0; i < x.size(); ++i) cross += std::exp(-x.points()(i, 0) * x.points()(i, 0) / 4.0);
  cross /= std::sqrt(2.0) * static_cast<double>(x.size());
  return K.mean() + 1.0 / std::sqrt(3.0) - 2.0 * cross;
}

TEST(MmdConcentration, ClosedFormMatchesLargeFreshSample) {
  const auto train = sample_gaussian(Vector::Zero(1), Vector::Ones(1), 100, 77);
  const auto fresh = sample_gaussian(Vector::Zero(1), Vector::Ones(1), 10000, 78);
  const double sampled = mmd_sq_biased(train, fresh, KernelSpec::gaussian(1.0));
  // fresh-sample estimator error is O(1e-2 / sqrt(1e4))
  EXPECT_NEAR(sampled, population_mmd_sq(train), 3e-3);
}

TEST(MmdConcentration, RateBoundCoversPopulationDistance) {
  const double bound = std::pow(rate_radius(100, 0.05, 1.0), 2);
  int covered = 0;
  const int trials = 200;
  for (int r = 0; r < trials; ++r) {
    const auto train = sample_gaussian(Vector::Zero(1), Vector::Ones(1), 100, 1000 + static_cast<std::uint64_t>(r));
    if (population_mmd_sq(train) <= bound) ++covered;
  }
  EXPECT_GE(covered, 190);
}

TEST(SampleCsv, RoundTripWithHeader) {
  const auto dir = std::filesystem::temp_directory_path() / "mmd_drccp_test_csv";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "s.csv").string();
  {
    std::ofstream f(path);
    f << "a,b\n1.5,2\n-3,4e-2\n";
  }
  const auto S = load_samples_csv(path);
  ASSERT_EQ(S.size(), 2);
  ASSERT_EQ(S.dim(), 2);
  EXPECT_DOUBLE_EQ(S.points()(1, 1), 0.04);
  write_samples_csv(path, S);
  const auto T = load_samples_csv(path);
  EXPECT_TRUE((T.points().array() == S.points().array()).all());
}

TEST(SampleCsv, RaggedRowsRejected) {
  const auto path = (std::filesystem::temp_directory_path() / "mmd_drccp_ragged.csv").string();
  {
    std::ofstream f(path);
    f << "1,2\n3\n";
  }
  EXPECT_THROW(load_samples_csv(path), ConfigError);
}
