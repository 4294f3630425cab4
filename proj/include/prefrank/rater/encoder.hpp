#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefrank/diffcore/mlp.hpp"
#include "prefrank/rater/types.hpp"

namespace prefrank::rater {

using diffcore::Tensor;

enum class LossVariant { kMonteCarlo, kUpperBound };

std::string ToString(LossVariant v);
LossVariant ParseLossVariant(const std::string& s);

// Floor added to softplus(raw scale) so that sigma stays strictly positive.
inline constexpr double kSigmaFloor = 1e-6;

struct EncoderConfig {
  int input_dim = 1;
  std::vector<int> hidden{64, 64};
  double dropout = 0.2;
  double weight_decay = 1e-4;
  // Monte Carlo draws per comparison in the training loss.
  int mc_samples = 8;
  // Stochastic passes for predictive uncertainty.
  int predict_passes = 20;
  LossVariant loss = LossVariant::kUpperBound;
  double learning_rate = 2e-3;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument naming the offending field.
  void Validate() const;
  // {input_dim, hidden..., 2}
  std::vector<int> Widths() const;

  nlohmann::json ToJson() const;
  static EncoderConfig FromJson(const nlohmann::json& j);
};

// Feed-forward encoder with two heads: raw mean and raw scale. Dropout doubles
// as the approximate weight posterior, so every "Bayesian" pass samples masks.
class EncoderModel {
 public:
  explicit EncoderModel(EncoderConfig config);
  EncoderModel(EncoderConfig config, diffcore::Mlp network);

  struct Heads {
    diffcore::Var mu;
    diffcore::Var sigma;
  };

  // Rows of `features` are items. sigma = softplus(raw) + kSigmaFloor.
  Heads Forward(diffcore::Graph& g, diffcore::Var features, bool stochastic, std::uint64_t seed,
                bool frozen = false);
  Heads Forward(diffcore::Graph& g, const Tensor& features, bool stochastic, std::uint64_t seed,
                bool frozen = false);

  const EncoderConfig& config() const { return config_; }
  diffcore::Mlp& network() { return network_; }
  const diffcore::Mlp& network() const { return network_; }

  // Snapshot: {"config": ..., "network": {widths, dropout, layers}}.
  nlohmann::json ToJson() const;
  static EncoderModel FromJson(const nlohmann::json& j);

 private:
  EncoderConfig config_;
  diffcore::Mlp network_;
};

GaussianRating Encode(const EncoderModel& model, std::span<const double> features, bool stochastic,
                      std::uint64_t seed);

// One encoder pass over every row of `features`.
std::vector<GaussianRating> EncodeBatch(const EncoderModel& model, const Tensor& features,
                                        bool stochastic, std::uint64_t seed);

// Deterministic (dropout off) mean head for every row.
std::vector<double> MeanRatings(const EncoderModel& model, const Tensor& features);

// passes[t][i] is item i's rating on stochastic pass t. Pass t uses the mask
// seed DeriveSeed(seed, t).
std::vector<std::vector<GaussianRating>> StochasticPasses(const EncoderModel& model,
                                                          const Tensor& features, int passes,
                                                          std::uint64_t seed);

// Predictive decomposition over recorded passes:
//   epistemic = mean(mu_t^2) - mean(mu_t)^2, aleatoric = mean(sigma_t^2).
// The variance is accumulated with Welford updates, so identical passes give
// exactly zero epistemic variance.
RatingEstimate SummarizePasses(std::span<const GaussianRating> passes);

std::vector<RatingEstimate> PredictWithUncertainty(const EncoderModel& model, const Tensor& features,
                                                   int passes, std::uint64_t seed);
RatingEstimate PredictWithUncertainty(const EncoderModel& model, std::span<const double> features,
                                      int passes, std::uint64_t seed);

}  // namespace prefrank::rater
