#include "prefrank/rater/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "prefrank/common/numerics.hpp"
#include "prefrank/common/random.hpp"

namespace prefrank::rater {

using diffcore::Graph;
using diffcore::Index;
using diffcore::Var;

double WinProbabilityFromSamples(std::span<const double> y_a, std::span<const double> y_b) {
  if (y_a.size() != y_b.size() || y_a.empty()) {
    throw std::invalid_argument("WinProbabilityFromSamples: sample counts differ or are empty");
  }
  double sum = 0.0;
  for (std::size_t m = 0; m < y_a.size(); ++m) sum += Sigmoid(y_a[m] - y_b[m]);
  return sum / static_cast<double>(y_a.size());
}

McWinProbability WinProbabilityMc(GaussianRating a, GaussianRating b, int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("WinProbabilityMc: samples must be >= 1");
  McWinProbability out;
  out.y_a.resize(static_cast<std::size_t>(samples));
  out.y_b.resize(static_cast<std::size_t>(samples));
  Rng rng(DeriveSeed(seed, 1));
  for (auto& y : out.y_a) y = a.mu + rng.Normal() * a.sigma;
  for (auto& y : out.y_b) y = b.mu + rng.Normal() * b.sigma;
  out.p_a = WinProbabilityFromSamples(out.y_a, out.y_b);
  return out;
}

McWinProbability WinProbabilityMc(const EncoderModel& model, std::span<const double> x_a,
                                  std::span<const double> x_b, int samples, std::uint64_t seed) {
  if (x_a.size() != x_b.size()) throw std::invalid_argument("WinProbabilityMc: feature widths differ");
  Tensor stacked(2, static_cast<Index>(x_a.size()));
  for (std::size_t i = 0; i < x_a.size(); ++i) {
    stacked(0, static_cast<Index>(i)) = x_a[i];
    stacked(1, static_cast<Index>(i)) = x_b[i];
  }
  const auto ratings = EncodeBatch(model, stacked, true, DeriveSeed(seed, 0));
  return WinProbabilityMc(ratings[0], ratings[1], samples, seed);
}

double WinProbabilityTransitive(GaussianRating a, GaussianRating b) {
  if (!(a.sigma > 0.0 && b.sigma > 0.0)) throw std::invalid_argument("WinProbabilityTransitive: sigma must be > 0");
  return Sigmoid((a.mu - b.mu) / std::sqrt(a.sigma * a.sigma + b.sigma * b.sigma));
}

void RequireKnownItems(std::span<const Comparison> comparisons, std::size_t item_count) {
  for (const auto& c : comparisons) {
    if (c.a >= item_count) throw UnknownItemError(c.a, item_count);
    if (c.b >= item_count) throw UnknownItemError(c.b, item_count);
  }
}

Var BuildRankLoss(Graph& g, EncoderModel& model, const Tensor& features,
                  std::span<const Comparison> batch, LossVariant variant, int samples,
                  std::uint64_t seed, RankLossSamples* record) {
  if (batch.empty()) throw std::invalid_argument("rank loss: empty batch");
  if (samples < 1) throw std::invalid_argument("rank loss: samples must be >= 1");
  RequireKnownItems(batch, static_cast<std::size_t>(features.rows()));

  const auto count = static_cast<Index>(batch.size());
  Tensor stacked(2 * count, features.cols());
  Tensor scores(count, 1);
  for (Index k = 0; k < count; ++k) {
    const Comparison& c = batch[static_cast<std::size_t>(k)];
    stacked.row(k) = features.row(static_cast<Index>(c.a));
    stacked.row(count + k) = features.row(static_cast<Index>(c.b));
    scores(k, 0) = c.score_a;
  }

  auto heads = model.Forward(g, stacked, /*stochastic=*/true, DeriveSeed(seed, 0));
  Var y = g.GaussianReparam(heads.mu, heads.sigma, DeriveSeed(seed, 1), samples);
  Var y_a = g.SliceRows(y, 0, count);
  Var y_b = g.SliceRows(y, count, count);
  if (record != nullptr) {
    record->y_a = g.value(y_a);
    record->y_b = g.value(y_b);
  }
  Var p = g.Sigmoid(g.Sub(y_a, y_b));  // count x M

  Var s_a;
  if (variant == LossVariant::kMonteCarlo) {
    Var average = g.Constant(Tensor::Constant(samples, 1, 1.0 / samples));
    p = g.MatMul(p, average);  // count x 1
    s_a = g.Constant(scores);
  } else {
    s_a = g.Constant(scores.replicate(1, samples));
  }
  const Tensor ones = Tensor::Ones(g.value(p).rows(), g.value(p).cols());
  Var s_b = g.Constant(ones - g.value(s_a));
  Var clamped = g.Clamp(p, kProbFloor, 1.0 - kProbFloor);
  Var log_a = g.Log(clamped);
  Var log_b = g.Log(g.AddScalar(g.Scale(clamped, -1.0), 1.0));
  Var ll = g.Add(g.Mul(s_a, log_a), g.Mul(s_b, log_b));
  return g.Scale(g.Mean(ll), -1.0);
}

namespace {

double EvaluateRankLoss(const EncoderModel& model, const Tensor& features,
                        std::span<const Comparison> batch, LossVariant variant, int samples,
                        std::uint64_t seed, RankLossSamples* record) {
  Graph g;
  // Value-only evaluation; no Backward is run so parameters are untouched.
  Var loss = BuildRankLoss(g, const_cast<EncoderModel&>(model), features, batch, variant, samples,
                           seed, record);
  return g.scalar(loss);
}

}  // namespace

double RankLossMc(const EncoderModel& model, const Tensor& features, std::span<const Comparison> batch,
                  int samples, std::uint64_t seed, RankLossSamples* record) {
  return EvaluateRankLoss(model, features, batch, LossVariant::kMonteCarlo, samples, seed, record);
}

double RankLossUb(const EncoderModel& model, const Tensor& features, std::span<const Comparison> batch,
                  int samples, std::uint64_t seed, RankLossSamples* record) {
  return EvaluateRankLoss(model, features, batch, LossVariant::kUpperBound, samples, seed, record);
}

}  // namespace prefrank::rater
