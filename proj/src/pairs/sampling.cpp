#include "prefrank/pairs/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "prefrank/common/random.hpp"
#include "prefrank/rater/losses.hpp"

namespace prefrank::pairs {

std::string ToString(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kRandom: return "random";
    case StrategyKind::kEasy: return "easy";
    case StrategyKind::kHard: return "hard";
    case StrategyKind::kHardPseudo: return "hard+pseudo";
  }
  return "unknown";
}

StrategyKind ParseStrategyKind(const std::string& s) {
  if (s == "random" || s == "rand") return StrategyKind::kRandom;
  if (s == "easy") return StrategyKind::kEasy;
  if (s == "hard") return StrategyKind::kHard;
  if (s == "hard+pseudo" || s == "hard-pseudo" || s == "pseudo") return StrategyKind::kHardPseudo;
  throw std::invalid_argument("strategy: expected random, easy, hard or hard+pseudo, got \"" + s + "\"");
}

namespace {

ItemPair RandomPair(Rng& rng, std::span<const ItemId> pool) {
  const std::size_t i = rng.Index(pool.size());
  std::size_t j = rng.Index(pool.size() - 1);
  if (j >= i) ++j;
  return {pool[i], pool[j]};
}

double Gap(std::span<const double> ratings, ItemPair p) { return std::abs(ratings[p.a] - ratings[p.b]); }

// prefer_small: Hard mining; otherwise Easy.
std::vector<ItemPair> MinePairs(std::span<const ItemId> pool, std::span<const double> ratings,
                                std::size_t count, std::size_t candidate_pool, bool prefer_small,
                                Rng& rng) {
  for (ItemId id : pool) {
    if (id >= ratings.size()) throw rater::UnknownItemError(id, ratings.size());
  }
  auto better = [&](double gap, double best) { return prefer_small ? gap < best : gap > best; };
  std::vector<ItemPair> out;
  out.reserve(count);
  const std::size_t m = pool.size();
  const std::size_t distinct = m * (m - 1) / 2;

  if (candidate_pool >= distinct) {
    // Exhaustive: the `count` best distinct pairs.
    if (count > distinct) {
      throw std::invalid_argument("SamplePairs: " + std::to_string(count) + " distinct pairs requested from " +
                                  std::to_string(distinct));
    }
    std::vector<ItemPair> all;
    all.reserve(distinct);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) all.push_back({pool[i], pool[j]});
    }
    std::stable_sort(all.begin(), all.end(), [&](ItemPair x, ItemPair y) {
      return better(Gap(ratings, x), Gap(ratings, y));
    });
    out.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
    return out;
  }

  for (std::size_t q = 0; q < count; ++q) {
    ItemPair best = RandomPair(rng, pool);
    double best_gap = Gap(ratings, best);
    for (std::size_t c = 1; c < candidate_pool; ++c) {
      const ItemPair cand = RandomPair(rng, pool);
      const double gap = Gap(ratings, cand);
      if (better(gap, best_gap)) {
        best = cand;
        best_gap = gap;
      }
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace

PairSelection SamplePairs(const Strategy& strategy, std::span<const ItemId> pool,
                          std::span<const double> ratings, std::size_t count, std::uint64_t seed) {
  if (pool.size() < 2) throw std::invalid_argument("SamplePairs: pool needs at least two items");
  if (strategy.candidate_pool < 1) throw std::invalid_argument("candidate_pool: must be >= 1");
  Rng rng(seed);
  PairSelection sel;
  switch (strategy.kind) {
    case StrategyKind::kRandom:
      sel.query.reserve(count);
      for (std::size_t q = 0; q < count; ++q) sel.query.push_back(RandomPair(rng, pool));
      break;
    case StrategyKind::kHard:
      sel.query = MinePairs(pool, ratings, count, strategy.candidate_pool, true, rng);
      break;
    case StrategyKind::kEasy:
      sel.query = MinePairs(pool, ratings, count, strategy.candidate_pool, false, rng);
      break;
    case StrategyKind::kHardPseudo: {
      sel.query = MinePairs(pool, ratings, count, strategy.candidate_pool, true, rng);
      auto extra = static_cast<std::size_t>(std::llround(strategy.pseudo_per_query * static_cast<double>(count)));
      const std::size_t distinct = pool.size() * (pool.size() - 1) / 2;
      if (strategy.candidate_pool >= distinct) extra = std::min(extra, distinct);
      sel.pseudo = MinePairs(pool, ratings, extra, strategy.candidate_pool, false, rng);
      break;
    }
  }
  return sel;
}

void PseudoPolicy::Validate() const {
  if (!(threshold > 0.5 && threshold <= 1.0)) throw std::invalid_argument("threshold: must be in (0.5, 1]");
}

std::optional<Comparison> PseudoLabel(rater::GaussianRating a, rater::GaussianRating b, ItemPair pair,
                                      const PseudoPolicy& policy) {
  policy.Validate();
  const double p = rater::WinProbabilityTransitive(a, b);
  if (p >= policy.threshold) return Comparison::Make(pair.a, pair.b, 1.0);
  if (p <= 1.0 - policy.threshold) return Comparison::Make(pair.a, pair.b, 0.0);
  return std::nullopt;
}

std::optional<Comparison> PseudoLabel(const rater::EncoderModel& model, const rater::Tensor& features,
                                      ItemPair pair, const PseudoPolicy& policy) {
  const auto rows = static_cast<std::size_t>(features.rows());
  if (pair.a >= rows) throw rater::UnknownItemError(pair.a, rows);
  if (pair.b >= rows) throw rater::UnknownItemError(pair.b, rows);
  rater::Tensor two(2, features.cols());
  two.row(0) = features.row(static_cast<diffcore::Index>(pair.a));
  two.row(1) = features.row(static_cast<diffcore::Index>(pair.b));
  const auto r = rater::EncodeBatch(model, two, false, 0);
  return PseudoLabel(r[0], r[1], pair, policy);
}

std::vector<Comparison> FilterEqual(std::span<const Comparison> comparisons) {
  std::vector<Comparison> out;
  std::copy_if(comparisons.begin(), comparisons.end(), std::back_inserter(out),
               [](const Comparison& c) { return !c.is_tie(); });
  return out;
}

}  // namespace prefrank::pairs
