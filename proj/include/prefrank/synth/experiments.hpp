#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "prefrank/pairs/active.hpp"
#include "prefrank/pairs/annotator.hpp"
#include "prefrank/synth/dataset.hpp"

namespace prefrank::synth {

// How raters are built inside experiments. The encoder's input width is taken
// from the data set and its seed from the experiment job.
struct RaterSetup {
  rater::EncoderConfig encoder;
  rater::TrainSchedule schedule;
};

// `count` uniformly random pairs (with repetition), each labeled by a fresh
// draw of `annotator`.
std::vector<rater::Comparison> AnnotateRandomPairs(const SyntheticDataset& data,
                                                   const pairs::AnnotatorModel& annotator, std::size_t count,
                                                   std::uint64_t seed);

// Noiseless, margin-free oracle over a data set's hidden attribute.
pairs::PairOracle NoiselessOracle(const SyntheticDataset& data);

rater::EncoderModel TrainRater(const SyntheticDataset& data, std::span<const rater::Comparison> comparisons,
                               const RaterSetup& setup, std::uint64_t seed);

// Spearman between deterministic mean ratings and the hidden attribute.
double RatingSpearman(const rater::EncoderModel& model, const SyntheticDataset& data);

// ---------------------------------------------------------------------------
// Number-of-pairs study.

struct BudgetCurveConfig {
  GeneratorKind kind = GeneratorKind::kLinear;
  int dim = 8;
  std::vector<std::size_t> sizes{100, 500, 1000};
  // Budgets are round(multiplier * n) random pairs.
  std::vector<double> multipliers{0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 5.0};
  double threshold = 0.9;
  RaterSetup rater;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct BudgetPoint {
  std::size_t n = 0;
  double multiplier = 0.0;
  std::size_t pairs = 0;
  double spearman = 0.0;
};

struct BudgetCurve {
  std::vector<BudgetPoint> points;  // sizes-major, multipliers-minor
  // Smallest tested budget reaching the threshold, per size (same order as
  // config.sizes); empty when no budget did.
  std::vector<std::optional<std::size_t>> minimal_pairs;
  // Least-squares slope of log m*(n) against log n over sizes with an m*.
  std::optional<double> exponent;
};

BudgetCurve PairsBudgetCurve(const BudgetCurveConfig& config);

// Slope of the least-squares line through (log x, log y). Needs two or more
// distinct x values.
std::optional<double> LogLogSlope(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Tie-margin sweep and noise resistance.

struct MarginSweepConfig {
  GeneratorKind kind = GeneratorKind::kLinear;
  int dim = 8;
  std::size_t n = 500;
  double budget_multiplier = 2.0;
  // Fractions of the attribute range.
  std::vector<double> margins{0.0, 0.05, 0.1, 0.2, 0.35};
  // Annotator perturbation half-width, also as a fraction of the range.
  double noise_fraction = 0.0;
  RaterSetup rater;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct MarginPoint {
  double margin = 0.0;
  double rating_spearman = 0.0;
  double tie_fraction = 0.0;
  // Misordered pairs of the rating permutation over C(n, 2).
  double normalized_risk = 0.0;
};

// All margins share one data set and one list of queried pairs; only the
// annotation changes.
std::vector<MarginPoint> MarginSweep(const MarginSweepConfig& config);

struct NoisePoint {
  double margin = 0.0;
  double rating_spearman = 0.0;
  // Spearman between the attribute and the attribute perturbed by
  // Uniform(-margin/2, margin/2) (in range units).
  double label_spearman = 0.0;
};

std::vector<NoisePoint> NoiseResistanceCurve(const MarginSweepConfig& config);

// (first - last) of a curve ordered by margin.
double Degradation(std::span<const double> curve);

// ---------------------------------------------------------------------------
// Pair-sampling strategy comparison.

struct StrategyTableConfig {
  GeneratorKind kind = GeneratorKind::kLinear;
  int dim = 8;
  std::size_t n = 500;
  std::size_t budget = 1000;
  std::vector<pairs::StrategyKind> strategies{pairs::StrategyKind::kRandom, pairs::StrategyKind::kEasy,
                                              pairs::StrategyKind::kHard, pairs::StrategyKind::kHardPseudo};
  int rounds = 4;
  double warmup_fraction = 0.25;
  std::size_t candidate_pool = 256;
  double pseudo_per_query = 1.0;
  pairs::PseudoPolicy pseudo;
  RaterSetup rater;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct StrategyRow {
  pairs::StrategyKind strategy = pairs::StrategyKind::kRandom;
  double spearman = 0.0;
  long oracle_queries = 0;
  std::size_t pseudo_labeled = 0;
};

// Each strategy runs its own collection loop against the same data set and
// is scored by its own final rater.
std::vector<StrategyRow> StrategyTable(const StrategyTableConfig& config);

// ---------------------------------------------------------------------------
// Uncertainty by attribute tercile.

struct UncertaintyShapeConfig {
  GeneratorKind kind = GeneratorKind::kRadial;
  int dim = 2;
  std::size_t n = 300;
  std::size_t budget = 600;
  pairs::AnnotatorModel annotator;
  RaterSetup rater;
  std::uint64_t seed = 0;
};

struct UncertaintyShape {
  // Mean predictive standard deviation sqrt(total) per attribute tercile.
  double low = 0.0;
  double middle = 0.0;
  double high = 0.0;
  // Mean over the union of the low and high terciles.
  double extremes = 0.0;
  double spearman = 0.0;
};

UncertaintyShape UncertaintyByTercile(const UncertaintyShapeConfig& config);

// ---------------------------------------------------------------------------
// CSV output, one row per grid point.

void WriteCsv(std::ostream& out, const BudgetCurve& curve);
void WriteCsv(std::ostream& out, std::span<const MarginPoint> rows);
void WriteCsv(std::ostream& out, std::span<const NoisePoint> rows);
void WriteCsv(std::ostream& out, std::span<const StrategyRow> rows);

}  // namespace prefrank::synth
