#include "mmd_drccp/common.hpp"

namespace mmd_drccp {

SampleSet::SampleSet(Matrix points, std::string label)
    : points_(std::move(points)), label_(std::move(label)) {
  if (points_.rows() > 0 && points_.cols() == 0) {
    throw std::invalid_argument("SampleSet: samples must have dimension >= 1");
  }
}

SampleSet SampleSet::head(Index n) const {
  if (n < 0 || n > size()) {
    throw std::invalid_argument("SampleSet::head: n out of range");
  }
  return SampleSet(points_.topRows(n), label_);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(splitmix64(base) ^ (stream * 0xd1b54a32d192ed03ULL + 1));
}

}  // namespace mmd_drccp
