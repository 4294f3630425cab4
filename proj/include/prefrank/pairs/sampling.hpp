#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefrank/rater/encoder.hpp"

namespace prefrank::pairs {

using rater::Comparison;
using rater::ItemId;

enum class StrategyKind { kRandom, kEasy, kHard, kHardPseudo };

std::string ToString(StrategyKind kind);
StrategyKind ParseStrategyKind(const std::string& s);

struct Strategy {
  StrategyKind kind = StrategyKind::kRandom;
  // Random pairs scored per mined query. A pool at least as large as the
  // number of distinct pairs switches to exhaustive enumeration.
  std::size_t candidate_pool = 256;
  // Easy pairs routed to pseudo-labeling per queried hard pair (HardPseudo).
  double pseudo_per_query = 1.0;
};

struct ItemPair {
  ItemId a = 0;
  ItemId b = 0;

  friend bool operator==(const ItemPair&, const ItemPair&) = default;
};

struct PairSelection {
  // Pairs that go to the oracle; exactly `count` of them.
  std::vector<ItemPair> query;
  // Pairs for the model to label itself; never sent to the oracle.
  std::vector<ItemPair> pseudo;
};

// Random: uniform over distinct pairs, with repetition. Hard / Easy: per
// query, the candidate with the smallest / largest |mu_i - mu_j| among a
// fresh random candidate pool. HardPseudo: Hard queries plus Easy pseudo
// pairs. `ratings` is indexed by item id and may be empty for Random.
// Throws std::invalid_argument when the pool has fewer than two items.
PairSelection SamplePairs(const Strategy& strategy, std::span<const ItemId> pool,
                          std::span<const double> ratings, std::size_t count, std::uint64_t seed);

struct PseudoPolicy {
  // Confidence needed to self-label; in (0.5, 1].
  double threshold = 0.9;

  void Validate() const;
};

// Labels with the transitive win probability p: S = 1 if p >= threshold,
// S = 0 if p <= 1 - threshold, otherwise discarded.
std::optional<Comparison> PseudoLabel(rater::GaussianRating a, rater::GaussianRating b, ItemPair pair,
                                      const PseudoPolicy& policy);
// Uses a deterministic encoder pass for both items.
std::optional<Comparison> PseudoLabel(const rater::EncoderModel& model, const rater::Tensor& features,
                                      ItemPair pair, const PseudoPolicy& policy);

// Keeps only different-pairs (S in {0, 1}), preserving order.
std::vector<Comparison> FilterEqual(std::span<const Comparison> comparisons);

}  // namespace prefrank::pairs
