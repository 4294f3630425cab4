#include "prefrank/synth/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "prefrank/common/random.hpp"

namespace prefrank::synth {

using diffcore::Index;

std::string ToString(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::kLinear: return "linear";
    case GeneratorKind::kRadial: return "radial";
    case GeneratorKind::kRing: return "ring";
  }
  return "unknown";
}

GeneratorKind ParseGeneratorKind(const std::string& s) {
  if (s == "linear") return GeneratorKind::kLinear;
  if (s == "radial") return GeneratorKind::kRadial;
  if (s == "ring") return GeneratorKind::kRing;
  throw std::invalid_argument("kind: expected linear, radial or ring, got \"" + s + "\"");
}

Oracle::Oracle(GeneratorKind kind, std::vector<double> parameters, std::vector<double> attributes)
    : kind_(kind), parameters_(std::move(parameters)), attributes_(std::move(attributes)) {}

double Oracle::Attribute(ItemId id) const {
  if (id >= attributes_.size()) throw rater::UnknownItemError(id, attributes_.size());
  return attributes_[id];
}

double Oracle::Evaluate(std::span<const double> features) const {
  if (features.size() != parameters_.size()) {
    throw std::invalid_argument("Oracle::Evaluate: expected " + std::to_string(parameters_.size()) +
                                " features");
  }
  double acc = 0.0;
  if (kind_ == GeneratorKind::kLinear) {
    for (std::size_t i = 0; i < features.size(); ++i) acc += parameters_[i] * features[i];
    return acc;
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double d = features[i] - parameters_[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double Oracle::Range() const {
  if (attributes_.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(attributes_.begin(), attributes_.end());
  return *hi - *lo;
}

std::span<const double> SyntheticDataset::Row(ItemId id) const {
  if (id >= size()) throw rater::UnknownItemError(id, size());
  return {features.data() + static_cast<Index>(id) * features.cols(), static_cast<std::size_t>(features.cols())};
}

namespace {

std::vector<double> RandomDirection(Rng& rng, int d) {
  std::vector<double> u(static_cast<std::size_t>(d));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : u) {
      x = rng.Normal();
      norm += x * x;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (auto& x : u) x /= norm;
  return u;
}

}  // namespace

SyntheticDataset Generate(GeneratorKind kind, std::size_t n, int d, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("n: must be >= 2");
  if (d < 1) throw std::invalid_argument("d: must be >= 1");
  if (kind == GeneratorKind::kRing && d < 2) throw std::invalid_argument("d: ring needs d >= 2");

  Rng rng(seed);
  const auto rows = static_cast<Index>(n);
  Tensor raw(rows, d);
  for (Index i = 0; i < rows; ++i) {
    switch (kind) {
      case GeneratorKind::kLinear:
        for (Index j = 0; j < d; ++j) raw(i, j) = rng.Uniform(-1.0, 1.0);
        break;
      case GeneratorKind::kRadial:
      case GeneratorKind::kRing: {
        const double radius = kind == GeneratorKind::kRadial ? rng.Uniform() : rng.Uniform(1.0, 2.0);
        std::vector<double> u;
        if (d == 1) {
          u = {rng.Uniform() < 0.5 ? -1.0 : 1.0};
        } else {
          u = RandomDirection(rng, d);
        }
        for (Index j = 0; j < d; ++j) raw(i, j) = radius * u[static_cast<std::size_t>(j)];
        break;
      }
    }
  }

  // Standardize each column; the raw-space origin moves with it.
  Tensor features(rows, d);
  std::vector<double> center(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j) {
    const double mean = raw.col(j).mean();
    const double var = (raw.col(j).array() - mean).square().mean();
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    features.col(j) = (raw.col(j).array() - mean) / sd;
    center[static_cast<std::size_t>(j)] = -mean / sd;
  }

  std::vector<double> params;
  if (kind == GeneratorKind::kLinear) {
    params = d == 1 ? std::vector<double>{1.0} : RandomDirection(rng, d);
  } else {
    params = center;
  }
  Oracle probe(kind, params, {});
  std::vector<double> attributes(n);
  for (std::size_t i = 0; i < n; ++i) {
    attributes[i] = probe.Evaluate({features.data() + static_cast<Index>(i) * d, static_cast<std::size_t>(d)});
  }

  SyntheticDataset ds;
  ds.kind = kind;
  ds.features = std::move(features);
  ds.oracle = Oracle(kind, std::move(params), std::move(attributes));
  return ds;
}

}  // namespace prefrank::synth
