#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mmd_drccp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Error taxonomy. Dimension problems are std::invalid_argument so callers can
// catch them generically; everything else derives from Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateSampleError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UnsupportedModelError : public Error {
 public:
  using Error::Error;
};

/// An ordered collection of N samples of dimension m, one sample per row.
/// This is the empirical distribution the ambiguity set is centred on.
class SampleSet {
 public:
  SampleSet() = default;
  explicit SampleSet(Matrix points, std::string label = {});

  Index size() const { return points_.rows(); }
  Index dim() const { return points_.cols(); }
  bool empty() const { return points_.rows() == 0; }

  const Matrix& points() const { return points_; }
  Eigen::Ref<const Vector> row(Index i) const { return points_.row(i).transpose(); }
  const std::string& label() const { return label_; }

  /// First n samples (n <= size()).
  SampleSet head(Index n) const;

 private:
  Matrix points_;
  std::string label_;
};

/// Deterministic 64-bit mixing used to derive independent RNG substreams.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace mmd_drccp
