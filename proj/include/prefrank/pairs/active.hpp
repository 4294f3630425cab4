#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "prefrank/pairs/annotator.hpp"
#include "prefrank/pairs/sampling.hpp"
#include "prefrank/rater/training.hpp"

namespace prefrank::pairs {

struct ActiveLoopConfig {
  Strategy strategy;
  // Oracle queries over the whole run.
  std::size_t budget = 0;
  // Collection rounds; the rater is retrained from scratch between rounds.
  int rounds = 4;
  // Share of the budget spent on random pairs before the first model exists.
  double warmup_fraction = 0.25;
  PseudoPolicy pseudo;
  rater::EncoderConfig encoder;
  rater::TrainSchedule schedule;
  std::uint64_t seed = 0;
};

struct ActiveLoopResult {
  std::vector<Comparison> queried;
  std::vector<Comparison> pseudo_labeled;
  // Calls made to the oracle; equals queried.size().
  long oracle_queries = 0;
  std::optional<rater::EncoderModel> model;
};

// Collects `budget` oracle labels in rounds using `config.strategy`, then
// trains the final rater on everything collected (queried plus pseudo).
ActiveLoopResult RunActiveLoop(const rater::Tensor& features, const PairOracle& oracle,
                               const ActiveLoopConfig& config);

}  // namespace prefrank::pairs
