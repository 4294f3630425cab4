#include "prefrank/rater/encoder.hpp"

#include <stdexcept>

#include "prefrank/common/random.hpp"

namespace prefrank::rater {

using diffcore::Graph;
using diffcore::Index;
using diffcore::Var;

Comparison Comparison::Make(ItemId a, ItemId b, double score_a) {
  if (a == b) throw std::invalid_argument("comparison of item " + std::to_string(a) + " with itself");
  if (!IsValidOutcome(score_a)) {
    throw std::invalid_argument("outcome must be 1, 0.5 or 0, got " + std::to_string(score_a));
  }
  return Comparison{a, b, score_a};
}

bool IsValidOutcome(double score) { return score == 1.0 || score == 0.5 || score == 0.0; }

std::string ToString(LossVariant v) { return v == LossVariant::kMonteCarlo ? "mc" : "ub"; }

LossVariant ParseLossVariant(const std::string& s) {
  if (s == "mc") return LossVariant::kMonteCarlo;
  if (s == "ub") return LossVariant::kUpperBound;
  throw std::invalid_argument("loss: expected \"mc\" or \"ub\", got \"" + s + "\"");
}

void EncoderConfig::Validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument(field + ": " + why);
  };
  if (input_dim < 1) fail("input_dim", "must be >= 1");
  for (int h : hidden) {
    if (h < 1) fail("hidden", "widths must be >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout", "must be in [0, 1)");
  if (!(weight_decay >= 0.0)) fail("weight_decay", "must be >= 0");
  if (mc_samples < 1) fail("mc_samples", "must be >= 1");
  if (predict_passes < 1) fail("predict_passes", "must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be > 0");
}

std::vector<int> EncoderConfig::Widths() const {
  std::vector<int> w{input_dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(2);
  return w;
}

nlohmann::json EncoderConfig::ToJson() const {
  return {{"input_dim", input_dim},         {"hidden", hidden},
          {"dropout", dropout},             {"weight_decay", weight_decay},
          {"mc_samples", mc_samples},       {"predict_passes", predict_passes},
          {"loss", ToString(loss)},         {"learning_rate", learning_rate},
          {"seed", seed}};
}

EncoderConfig EncoderConfig::FromJson(const nlohmann::json& j) {
  EncoderConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.dropout = j.at("dropout").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.mc_samples = j.at("mc_samples").get<int>();
  c.predict_passes = j.at("predict_passes").get<int>();
  c.loss = ParseLossVariant(j.at("loss").get<std::string>());
  c.learning_rate = j.at("learning_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.Validate();
  return c;
}

EncoderModel::EncoderModel(EncoderConfig config)
    : config_(std::move(config)),
      network_((config_.Validate(), config_.Widths()), config_.dropout, DeriveSeed(config_.seed, 0x1e),
               /*zero_output=*/true) {}

EncoderModel::EncoderModel(EncoderConfig config, diffcore::Mlp network)
    : config_(std::move(config)), network_(std::move(network)) {
  config_.Validate();
  if (network_.widths() != config_.Widths()) {
    throw std::invalid_argument("EncoderModel: network widths do not match config");
  }
  if (network_.dropout_rate() != config_.dropout) {
    throw std::invalid_argument("EncoderModel: network dropout does not match config");
  }
}

EncoderModel::Heads EncoderModel::Forward(Graph& g, Var features, bool stochastic,
                                          std::uint64_t seed, bool frozen) {
  Var out = network_.Forward(g, features, {.stochastic = stochastic, .seed = seed, .frozen = frozen});
  Var mu = g.SliceCols(out, 0, 1);
  Var sigma = g.AddScalar(g.Softplus(g.SliceCols(out, 1, 1)), kSigmaFloor);
  return {mu, sigma};
}

EncoderModel::Heads EncoderModel::Forward(Graph& g, const Tensor& features, bool stochastic,
                                          std::uint64_t seed, bool frozen) {
  return Forward(g, g.Constant(features), stochastic, seed, frozen);
}

nlohmann::json EncoderModel::ToJson() const {
  return {{"config", config_.ToJson()}, {"network", network_.ToJson()}};
}

EncoderModel EncoderModel::FromJson(const nlohmann::json& j) {
  return EncoderModel(EncoderConfig::FromJson(j.at("config")), diffcore::Mlp::FromJson(j.at("network")));
}

std::vector<GaussianRating> EncodeBatch(const EncoderModel& model, const Tensor& features,
                                        bool stochastic, std::uint64_t seed) {
  Graph g;
  // Frozen forward: parameters enter as constants and are never written.
  auto heads = const_cast<EncoderModel&>(model).Forward(g, features, stochastic, seed, true);
  const Tensor& mu = g.value(heads.mu);
  const Tensor& sigma = g.value(heads.sigma);
  std::vector<GaussianRating> out(static_cast<std::size_t>(mu.rows()));
  for (Index i = 0; i < mu.rows(); ++i) out[static_cast<std::size_t>(i)] = {mu(i, 0), sigma(i, 0)};
  return out;
}

GaussianRating Encode(const EncoderModel& model, std::span<const double> features, bool stochastic,
                      std::uint64_t seed) {
  Tensor row(1, static_cast<Index>(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i) row(0, static_cast<Index>(i)) = features[i];
  return EncodeBatch(model, row, stochastic, seed).front();
}

std::vector<double> MeanRatings(const EncoderModel& model, const Tensor& features) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(features.rows()));
  for (const auto& r : EncodeBatch(model, features, false, 0)) out.push_back(r.mu);
  return out;
}

std::vector<std::vector<GaussianRating>> StochasticPasses(const EncoderModel& model,
                                                          const Tensor& features, int passes,
                                                          std::uint64_t seed) {
  if (passes < 1) throw std::invalid_argument("passes must be >= 1");
  std::vector<std::vector<GaussianRating>> out;
  out.reserve(static_cast<std::size_t>(passes));
  for (int t = 0; t < passes; ++t) {
    out.push_back(EncodeBatch(model, features, true, DeriveSeed(seed, static_cast<std::uint64_t>(t))));
  }
  return out;
}

RatingEstimate SummarizePasses(std::span<const GaussianRating> passes) {
  if (passes.empty()) throw std::invalid_argument("SummarizePasses: no passes");
  double mean = 0.0;
  double m2 = 0.0;
  double sigma_sq = 0.0;
  double count = 0.0;
  for (const auto& p : passes) {
    count += 1.0;
    const double delta = p.mu - mean;
    mean += delta / count;
    m2 += delta * (p.mu - mean);
    sigma_sq += p.sigma * p.sigma;
  }
  RatingEstimate est;
  est.mean = mean;
  est.epistemic = m2 > 0.0 ? m2 / count : 0.0;
  est.aleatoric = sigma_sq / count;
  est.total = est.epistemic + est.aleatoric;
  return est;
}

std::vector<RatingEstimate> PredictWithUncertainty(const EncoderModel& model, const Tensor& features,
                                                   int passes, std::uint64_t seed) {
  const auto runs = StochasticPasses(model, features, passes, seed);
  std::vector<RatingEstimate> out;
  out.reserve(static_cast<std::size_t>(features.rows()));
  std::vector<GaussianRating> column(static_cast<std::size_t>(passes));
  for (std::size_t i = 0; i < static_cast<std::size_t>(features.rows()); ++i) {
    for (std::size_t t = 0; t < runs.size(); ++t) column[t] = runs[t][i];
    out.push_back(SummarizePasses(column));
  }
  return out;
}

RatingEstimate PredictWithUncertainty(const EncoderModel& model, std::span<const double> features,
                                      int passes, std::uint64_t seed) {
  Tensor row(1, static_cast<Index>(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i) row(0, static_cast<Index>(i)) = features[i];
  return PredictWithUncertainty(model, row, passes, seed).front();
}

}  // namespace prefrank::rater
