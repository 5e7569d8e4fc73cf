#include "mmd_drccp/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace mmd_drccp {

AmbiguityRadius AmbiguityRadius::fixed(double value, RadiusScale scale) {
  AmbiguityRadius r{value, RadiusMethod::Fixed, 0.0, scale};
  r.validate();
  return r;
}

void AmbiguityRadius::validate() const {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument("ambiguity radius must be finite and nonnegative");
  }
  if (method != RadiusMethod::Fixed && !(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument("ambiguity radius confidence must lie in (0, 1)");
  }
}

void BootstrapConfig::validate() const {
  if (replicates < 1) {
    throw std::invalid_argument("bootstrap: replicates must be >= 1");
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("bootstrap: beta must lie in (0, 1)");
  }
}

long long robust_ceil(double x) {
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x))) {
    return static_cast<long long>(nearest);
  }
  return static_cast<long long>(std::ceil(x));
}

double mmd_sq_biased_unclamped(const SampleSet& X, const SampleSet& Y, const KernelSpec& spec) {
  if (X.empty() || Y.empty()) {
    throw std::invalid_argument("mmd_sq_biased: empty sample");
  }
  if (X.dim() != Y.dim()) {
    throw std::invalid_argument("mmd_sq_biased: dimension mismatch");
  }
  const double nx = static_cast<double>(X.size());
  const double ny = static_cast<double>(Y.size());
  const double kxx = gram(spec, X, X).sum() / (nx * nx);
  const double kyy = gram(spec, Y, Y).sum() / (ny * ny);
  // k(x, y) is symmetric, so summing K_xy or K_yx gives the same value; the
  // sum is taken in a fixed orientation to keep the statistic symmetric bitwise.
  const bool swap = X.size() > Y.size() ||
                    (X.size() == Y.size() && std::lexicographical_compare(
                                                 Y.points().data(), Y.points().data() + Y.points().size(),
                                                 X.points().data(), X.points().data() + X.points().size()));
  const double kxy = (swap ? gram(spec, Y, X) : gram(spec, X, Y)).sum() / (nx * ny);
  return (kxx + kyy) - 2.0 * kxy;
}

double mmd_sq_biased(const SampleSet& X, const SampleSet& Y, const KernelSpec& spec) {
  return std::max(0.0, mmd_sq_biased_unclamped(X, Y, spec));
}

double rate_radius(long long N, double delta, double C) {
  if (N < 1) throw std::invalid_argument("rate_radius: N must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("rate_radius: delta must lie in (0, 1)");
  if (!(C > 0.0)) throw std::invalid_argument("rate_radius: C must be positive");
  const double n = static_cast<double>(N);
  return std::sqrt(C / n) + std::sqrt(2.0 * C * std::log(1.0 / delta) / n);
}

AmbiguityRadius rate_radius(long long N, double delta, const KernelSpec& spec) {
  spec.validate();
  return AmbiguityRadius{rate_radius(N, delta, spec.sup_bound), RadiusMethod::RateBound, delta,
                         RadiusScale::Mmd};
}

std::vector<double> bootstrap_statistics(const SampleSet& sample, const KernelSpec& spec,
                                         const BootstrapConfig& cfg) {
  cfg.validate();
  if (sample.size() < 2) {
    throw std::invalid_argument("bootstrap: need at least two samples");
  }
  const Index n = sample.size();
  const Matrix K = gram(spec, sample);
  const double kx = K.sum();
  const Vector col_sums = K.colwise().sum().transpose();
  const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));

  std::vector<double> stats(static_cast<std::size_t>(cfg.replicates));
  Vector counts(n);
  for (int m = 0; m < cfg.replicates; ++m) {
    std::mt19937_64 rng(derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(m)));
    std::uniform_int_distribution<Index> pick(0, n - 1);
    counts.setZero();
    for (Index draw = 0; draw < n; ++draw) {
      counts[pick(rng)] += 1.0;
    }
    // Resampled points enter only through their multiplicities.
    const double ky = counts.dot(K * counts);
    const double kxy = counts.dot(col_sums);
    stats[static_cast<std::size_t>(m)] = std::max(0.0, inv_n2 * (kx + ky - 2.0 * kxy));
  }
  std::sort(stats.begin(), stats.end());
  return stats;
}

double bootstrap_quantile(const std::vector<double>& sorted_stats, double beta) {
  if (sorted_stats.empty()) {
    throw std::invalid_argument("bootstrap_quantile: no statistics");
  }
  const auto B = static_cast<long long>(sorted_stats.size());
  long long k = robust_ceil(static_cast<double>(B) * beta);
  k = std::clamp<long long>(k, 1, B);
  return sorted_stats[static_cast<std::size_t>(k - 1)];
}

AmbiguityRadius bootstrap_radius(const SampleSet& sample, const KernelSpec& spec,
                                 const BootstrapConfig& cfg) {
  const auto stats = bootstrap_statistics(sample, spec, cfg);
  double eps = bootstrap_quantile(stats, cfg.beta);
  if (cfg.scale == RadiusScale::Mmd) {
    eps = std::sqrt(eps);
  }
  return AmbiguityRadius{eps, RadiusMethod::Bootstrap, cfg.beta, cfg.scale};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string{} : cell.substr(first, last - first + 1));
  }
  return cells;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  char* end = nullptr;
  out = std::strtod(text.c_str(), &end);
  return end == text.c_str() + text.size();
}

}  // namespace

SampleSet load_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open sample file '" + path + "'");
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    std::vector<double> values(cells.size());
    bool numeric = true;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      numeric = numeric && parse_double(cells[c], values[c]);
    }
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;  // header
      throw ConfigError(path + ":" + std::to_string(line_no) + ": non-numeric sample row");
    }
    if (width == 0) width = values.size();
    if (values.size() != width) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(width) + " columns");
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) {
    throw ConfigError(path + ": no samples");
  }
  Matrix points(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      points(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return SampleSet(std::move(points), path);
}

void write_samples_csv(const std::string& path, const SampleSet& sample) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write sample file '" + path + "'");
  }
  out << std::setprecision(17);
  for (Index j = 0; j < sample.dim(); ++j) {
    out << (j ? "," : "") << "xi" << j;
  }
  out << '\n';
  for (Index i = 0; i < sample.size(); ++i) {
    for (Index j = 0; j < sample.dim(); ++j) {
      out << (j ? "," : "") << sample.points()(i, j);
    }
    out << '\n';
  }
}

std::string to_string(RadiusMethod method) {
  switch (method) {
    case RadiusMethod::RateBound: return "rate";
    case RadiusMethod::Bootstrap: return "bootstrap";
    case RadiusMethod::Fixed: return "fixed";
  }
  return "unknown";
}

std::string to_string(RadiusScale scale) {
  return scale == RadiusScale::Mmd ? "mmd" : "mmd_squared";
}

}  // namespace mmd_drccp
