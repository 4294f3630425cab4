#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prefrank::rater {

using ItemId = std::size_t;

// One annotated pair. score_a is 1 (A wins), 0.5 (tie) or 0 (B wins);
// B's score is always 1 - score_a.
struct Comparison {
  ItemId a = 0;
  ItemId b = 0;
  double score_a = 0.5;

  static Comparison Make(ItemId a, ItemId b, double score_a);

  double score_b() const { return 1.0 - score_a; }
  bool is_tie() const { return score_a == 0.5; }

  friend bool operator==(const Comparison&, const Comparison&) = default;
};

bool IsValidOutcome(double score);

// Latent rating y ~ N(mu, sigma^2) for one item.
struct GaussianRating {
  double mu = 0.0;
  double sigma = 1.0;
};

// Summary of T stochastic encoder passes. total = epistemic + aleatoric.
struct RatingEstimate {
  double mean = 0.0;
  double epistemic = 0.0;
  double aleatoric = 0.0;
  double total = 0.0;
};

class UnknownItemError : public std::out_of_range {
 public:
  UnknownItemError(ItemId id, std::size_t item_count)
      : std::out_of_range("unknown item id " + std::to_string(id) + " (have " +
                          std::to_string(item_count) + " items)") {}
};

}  // namespace prefrank::rater
