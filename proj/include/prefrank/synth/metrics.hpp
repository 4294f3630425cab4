#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "prefrank/synth/dataset.hpp"

namespace prefrank::synth {

// 1-based ranks; tied values share the average of their positions.
std::vector<double> AverageRanks(std::span<const double> values);

// Spearman rank correlation: Pearson correlation of average ranks. Returns 0
// when either input is constant (no rank information). Throws
// std::invalid_argument on length mismatch or fewer than two values.
double Spearman(std::span<const double> a, std::span<const double> b);

struct RiskReport {
  // Items sorted by descending rating, ties broken by ascending id.
  std::vector<ItemId> permutation;
  // weights[u * n + v] == 1 iff the noiseless oracle strictly prefers u to v.
  std::vector<std::uint8_t> weights;
  // Number of strictly preferred pairs that the permutation misorders.
  double total = 0.0;

  double Weight(ItemId u, ItemId v) const {
    return weights[u * permutation.size() + v];
  }
};

RiskReport ExpectedRisk(std::span<const double> ratings, const Oracle& oracle);

}  // namespace prefrank::synth
