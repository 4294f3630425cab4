#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "prefrank/rater/encoder.hpp"

namespace prefrank::rater {

// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] before any log.
inline constexpr double kProbFloor = 1e-7;

struct McWinProbability {
  double p_a = 0.5;
  // The reparameterized draws behind p_a, kept for loss replay.
  std::vector<double> y_a;
  std::vector<double> y_b;
};

// p_a = (1/M) sum_m sigm(y_a[m] - y_b[m]).
double WinProbabilityFromSamples(std::span<const double> y_a, std::span<const double> y_b);

// Draws y = mu + eps * sigma, M for A then M for B, from DeriveSeed(seed, 1).
McWinProbability WinProbabilityMc(GaussianRating a, GaussianRating b, int samples, std::uint64_t seed);

// One stochastic encoder pass over (x_a, x_b) with mask seed DeriveSeed(seed, 0),
// then the same sampling as the rating-level overload.
McWinProbability WinProbabilityMc(const EncoderModel& model, std::span<const double> x_a,
                                  std::span<const double> x_b, int samples, std::uint64_t seed);

// sigm((mu_a - mu_b) / sqrt(sigma_a^2 + sigma_b^2)); no sampling, transitive.
double WinProbabilityTransitive(GaussianRating a, GaussianRating b);

// Draws recorded while building a rank loss: row k of y_a / y_b holds the M
// samples for batch[k].
struct RankLossSamples {
  Tensor y_a;
  Tensor y_b;
};

// Builds the ranking loss of `batch` on `g`. One stochastic encoder pass over
// the stacked A and B rows (mask seed DeriveSeed(seed, 0)), then M
// reparameterized draws per item (DeriveSeed(seed, 1)).
//   kMonteCarlo:  -mean_k [ S log P^MC + (1 - S) log(1 - P^MC) ]
//   kUpperBound:  -mean_k (1/M) sum_m [ S log P_m + (1 - S) log(1 - P_m) ]
// Throws std::invalid_argument on an empty batch, UnknownItemError on ids
// outside `features`.
diffcore::Var BuildRankLoss(diffcore::Graph& g, EncoderModel& model, const Tensor& features,
                            std::span<const Comparison> batch, LossVariant variant, int samples,
                            std::uint64_t seed, RankLossSamples* record = nullptr);

double RankLossMc(const EncoderModel& model, const Tensor& features, std::span<const Comparison> batch,
                  int samples, std::uint64_t seed, RankLossSamples* record = nullptr);
double RankLossUb(const EncoderModel& model, const Tensor& features, std::span<const Comparison> batch,
                  int samples, std::uint64_t seed, RankLossSamples* record = nullptr);

// Checks every id in `comparisons` against `item_count`.
void RequireKnownItems(std::span<const Comparison> comparisons, std::size_t item_count);

}  // namespace prefrank::rater
