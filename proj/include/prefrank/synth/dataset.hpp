#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prefrank/diffcore/tensor.hpp"
#include "prefrank/rater/types.hpp"

namespace prefrank::synth {

using diffcore::Tensor;
using rater::ItemId;

enum class GeneratorKind {
  kLinear,  // attribute = w . x
  kRadial,  // attribute = |x - c|, radius uniform on [0, 1] before scaling
  kRing,    // points on an annulus, attribute = radius
};

std::string ToString(GeneratorKind kind);
GeneratorKind ParseGeneratorKind(const std::string& s);

// Ground truth for a synthetic data set. Training code only ever sees the
// features; the attribute is reached through this object.
class Oracle {
 public:
  Oracle() = default;
  Oracle(GeneratorKind kind, std::vector<double> direction_or_center, std::vector<double> attributes);

  std::size_t size() const { return attributes_.size(); }
  double Attribute(ItemId id) const;
  const std::vector<double>& attributes() const { return attributes_; }

  // Attribute of an arbitrary point in (standardized) feature space.
  double Evaluate(std::span<const double> features) const;

  GeneratorKind kind() const { return kind_; }
  // Linear: unit weight vector. Radial and ring: center.
  const std::vector<double>& parameters() const { return parameters_; }
  double Range() const;

 private:
  GeneratorKind kind_ = GeneratorKind::kLinear;
  std::vector<double> parameters_;
  std::vector<double> attributes_;
};

struct SyntheticDataset {
  GeneratorKind kind = GeneratorKind::kLinear;
  Tensor features;  // n x d, every column zero mean and unit variance
  Oracle oracle;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  std::span<const double> Row(ItemId id) const;
};

// Deterministic in (kind, n, d, seed). Requires n >= 2, d >= 1, and d >= 2
// for the ring. Throws std::invalid_argument otherwise.
SyntheticDataset Generate(GeneratorKind kind, std::size_t n, int d, std::uint64_t seed);

}  // namespace prefrank::synth
