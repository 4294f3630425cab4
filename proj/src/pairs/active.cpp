#include "prefrank/pairs/active.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "prefrank/common/random.hpp"

namespace prefrank::pairs {

namespace {

rater::EncoderModel TrainFresh(const rater::Tensor& features, const std::vector<Comparison>& data,
                               const ActiveLoopConfig& config) {
  rater::EncoderModel model(config.encoder);
  rater::Train(model, features, data, config.schedule.For(data.size()));
  return model;
}

}  // namespace

ActiveLoopResult RunActiveLoop(const rater::Tensor& features, const PairOracle& oracle,
                               const ActiveLoopConfig& config) {
  if (config.rounds < 1) throw std::invalid_argument("rounds: must be >= 1");
  if (!(config.warmup_fraction >= 0.0 && config.warmup_fraction <= 1.0)) {
    throw std::invalid_argument("warmup_fraction: must be in [0, 1]");
  }
  config.pseudo.Validate();
  const auto n = static_cast<std::size_t>(features.rows());
  std::vector<ItemId> pool(n);
  std::iota(pool.begin(), pool.end(), 0);

  ActiveLoopResult result;
  auto query = [&](const std::vector<ItemPair>& pairs) {
    for (const auto& p : pairs) {
      const double s = oracle(p.a, p.b);
      ++result.oracle_queries;
      result.queried.push_back(Comparison::Make(p.a, p.b, s));
    }
  };

  const bool adaptive = config.strategy.kind != StrategyKind::kRandom && config.rounds > 1;
  std::size_t warmup = config.budget;
  if (adaptive) {
    warmup = static_cast<std::size_t>(std::ceil(config.warmup_fraction * static_cast<double>(config.budget)));
    warmup = std::clamp<std::size_t>(warmup, std::min<std::size_t>(config.budget, 1), config.budget);
  }
  query(SamplePairs({StrategyKind::kRandom}, pool, {}, warmup, DeriveSeed(config.seed, 0)).query);

  if (adaptive) {
    const int mined_rounds = config.rounds - 1;
    for (int r = 0; r < mined_rounds; ++r) {
      const std::size_t remaining = config.budget - result.queried.size();
      const std::size_t count = remaining / static_cast<std::size_t>(mined_rounds - r);
      if (count == 0) continue;
      std::vector<Comparison> data = result.queried;
      data.insert(data.end(), result.pseudo_labeled.begin(), result.pseudo_labeled.end());
      rater::EncoderModel model = TrainFresh(features, data, config);
      const auto ratings = rater::MeanRatings(model, features);
      const auto sel = SamplePairs(config.strategy, pool, ratings, count,
                                   DeriveSeed(config.seed, static_cast<std::uint64_t>(r) + 1));
      query(sel.query);
      for (const auto& p : sel.pseudo) {
        if (auto c = PseudoLabel(model, features, p, config.pseudo)) result.pseudo_labeled.push_back(*c);
      }
    }
  }

  std::vector<Comparison> data = result.queried;
  data.insert(data.end(), result.pseudo_labeled.begin(), result.pseudo_labeled.end());
  result.model = TrainFresh(features, data, config);
  return result;
}

}  // namespace prefrank::pairs
