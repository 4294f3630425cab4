#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "prefrank/common/numerics.hpp"
#include "prefrank/pairs/active.hpp"
#include "prefrank/pairs/annotator.hpp"
#include "prefrank/pairs/comparisons_io.hpp"
#include "prefrank/pairs/sampling.hpp"
#include "prefrank/rater/losses.hpp"
#include "prefrank/synth/dataset.hpp"
#include "prefrank/synth/metrics.hpp"

namespace prefrank::pairs {
namespace {

// ---------------------------------------------------------------------------
// annotate

TEST(Annotate, EqualAttributesTie) {
  EXPECT_EQ(AnnotateWithNoise(3.0, 3.0, 0.0, 0.0, 0.0), 0.5);
  Annotator ann({.tie_margin = 0.0, .noise_half_width = 0.0, .seed = 1});
  EXPECT_EQ(ann.Annotate(3.0, 3.0), 0.5);
}

TEST(Annotate, LargeGapBeyondMarginIsDecisive) {
  Annotator ann({.tie_margin = 5.0, .noise_half_width = 0.0, .seed = 1});
  EXPECT_EQ(ann.Annotate(10.0, 0.0), 1.0);
  EXPECT_EQ(ann.Annotate(0.0, 10.0), 0.0);
  EXPECT_EQ(ann.Annotate(4.0, 0.0), 0.5);
  EXPECT_EQ(ann.queries(), 3);
}

TEST(Annotate, RejectsNegativeParameters) {
  EXPECT_THROW(Annotator({.tie_margin = -1.0}), std::invalid_argument);
  EXPECT_THROW(Annotator({.noise_half_width = -0.1}), std::invalid_argument);
}

// The perturbation difference of two Uniform(-w, w) draws is triangular on
// [-2w, 2w]; P(tie) = F(M - g) - F(-M - g).
double TriangleCdf(double t, double w) {
  if (w == 0.0) return t >= 0.0 ? 1.0 : 0.0;
  const double half = 2.0 * w;
  if (t <= -half) return 0.0;
  if (t >= half) return 1.0;
  if (t <= 0.0) return (t + half) * (t + half) / (2.0 * half * half);
  return 1.0 - (half - t) * (half - t) / (2.0 * half * half);
}

double TieProbability(double gap, double margin, double w) {
  return TriangleCdf(margin - gap, w) - TriangleCdf(-margin - gap, w);
}

TEST(Annotate, TieProbabilityMatchesTriangleConvolution) {
  struct Case {
    double gap;
    double margin;
    double w;
  };
  const Case cases[] = {{0.0, 0.5, 1.0}, {0.7, 0.3, 0.5}, {1.5, 0.4, 1.0}, {0.2, 0.1, 0.05}, {2.0, 1.0, 2.0}};
  const int draws = 100000;
  std::uint64_t seed = 10;
  for (const auto& c : cases) {
    Annotator ann({.tie_margin = c.margin, .noise_half_width = c.w, .seed = seed++});
    int ties = 0;
    for (int i = 0; i < draws; ++i) ties += ann.Annotate(c.gap, 0.0) == 0.5 ? 1 : 0;
    const double p = TieProbability(c.gap, c.margin, c.w);
    const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / draws);
    EXPECT_NEAR(static_cast<double>(ties) / draws, p, 4.0 * se + 1e-12)
        << "gap=" << c.gap << " margin=" << c.margin << " w=" << c.w;
  }
}

TEST(Annotate, SwappingItemsMirrorsOutcome) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double oa = rng.Uniform(-1, 1);
    const double ob = rng.Uniform(-1, 1);
    const double na = rng.Uniform(-0.3, 0.3);
    const double nb = rng.Uniform(-0.3, 0.3);
    const double m = rng.Uniform(0, 0.2);
    EXPECT_EQ(AnnotateWithNoise(oa, ob, na, nb, m), 1.0 - AnnotateWithNoise(ob, oa, nb, na, m));
  }
}

TEST(Annotate, NoiselessZeroMarginIsStrictOrder) {
  Rng rng(4);
  std::vector<double> omega(30);
  for (auto& o : omega) o = rng.Uniform(0, 1);
  Annotator ann({});
  for (std::size_t a = 0; a < omega.size(); ++a) {
    for (std::size_t b = 0; b < omega.size(); ++b) {
      if (a == b) continue;
      EXPECT_EQ(ann.Annotate(omega[a], omega[b]), omega[a] > omega[b] ? 1.0 : 0.0);
    }
  }
}

// ---------------------------------------------------------------------------
// sample_pairs

std::vector<ItemId> Pool(std::size_t n) {
  std::vector<ItemId> p(n);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

std::set<ItemId> AsSet(ItemPair p) { return {p.a, p.b}; }

TEST(SamplePairs, PoolOfTwoHasOnePair) {
  const auto pool = Pool(2);
  const std::vector<double> ratings{0.0, 1.0};
  for (auto kind : {StrategyKind::kRandom, StrategyKind::kEasy, StrategyKind::kHard, StrategyKind::kHardPseudo}) {
    const auto sel = SamplePairs({kind}, pool, ratings, 1, 1);
    ASSERT_EQ(sel.query.size(), 1u) << ToString(kind);
    for (auto p : sel.query) EXPECT_EQ(AsSet(p), (std::set<ItemId>{0, 1}));
    for (auto p : sel.pseudo) EXPECT_EQ(AsSet(p), (std::set<ItemId>{0, 1}));
  }
}

TEST(SamplePairs, HardExhaustivePicksSmallestGap) {
  const auto pool = Pool(3);
  const std::vector<double> ratings{0.0, 1.0, 10.0};
  const auto sel = SamplePairs({StrategyKind::kHard, 3}, pool, ratings, 1, 0);
  ASSERT_EQ(sel.query.size(), 1u);
  EXPECT_EQ(sel.query[0], (ItemPair{0, 1}));
  const auto easy = SamplePairs({StrategyKind::kEasy, 3}, pool, ratings, 1, 0);
  EXPECT_EQ(easy.query[0], (ItemPair{0, 2}));
}

TEST(SamplePairs, ExhaustiveModeHasNoRepeats) {
  const auto pool = Pool(6);
  std::vector<double> ratings{0.3, 0.1, 0.9, 0.5, 0.7, 0.2};
  const auto sel = SamplePairs({StrategyKind::kHard, 1000}, pool, ratings, 15, 0);
  std::set<std::set<ItemId>> seen;
  for (auto p : sel.query) seen.insert(AsSet(p));
  EXPECT_EQ(seen.size(), 15u);
  EXPECT_THROW(SamplePairs({StrategyKind::kHard, 1000}, pool, ratings, 16, 0), std::invalid_argument);
}

double MeanGap(const std::vector<ItemPair>& pairs, const std::vector<double>& r) {
  double s = 0.0;
  for (auto p : pairs) s += std::abs(r[p.a] - r[p.b]);
  return s / static_cast<double>(pairs.size());
}

TEST(SamplePairs, HardGapsAreSmallerThanRandomGaps) {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(100 + trial);
    const std::size_t n = 10 + rng.Index(40);
    std::vector<double> ratings(n);
    for (auto& r : ratings) r = rng.Normal();
    const auto pool = Pool(n);
    const auto hard = SamplePairs({StrategyKind::kHard}, pool, ratings, 50, trial);
    const auto rand = SamplePairs({StrategyKind::kRandom}, pool, ratings, 50, trial);
    const auto easy = SamplePairs({StrategyKind::kEasy}, pool, ratings, 50, trial);
    EXPECT_LE(MeanGap(hard.query, ratings), MeanGap(rand.query, ratings));
    EXPECT_GE(MeanGap(easy.query, ratings), MeanGap(rand.query, ratings));
    for (auto p : rand.query) EXPECT_NE(p.a, p.b);
  }
}

TEST(SamplePairs, RandomIsUniformOverPairs) {
  const auto pool = Pool(4);
  const auto sel = SamplePairs({StrategyKind::kRandom}, pool, {}, 60000, 9);
  std::map<std::set<ItemId>, int> counts;
  for (auto p : sel.query) ++counts[AsSet(p)];
  ASSERT_EQ(counts.size(), 6u);
  const double expected = 10000.0;
  for (const auto& [pair, c] : counts) EXPECT_NEAR(c, expected, 4.0 * std::sqrt(expected * 5.0 / 6.0));
}

TEST(SamplePairs, RespectsSubsetPoolAndSeed) {
  const std::vector<ItemId> pool{3, 7, 11};
  std::vector<double> ratings(12, 0.0);
  const auto a = SamplePairs({StrategyKind::kRandom}, pool, ratings, 20, 5);
  const auto b = SamplePairs({StrategyKind::kRandom}, pool, ratings, 20, 5);
  EXPECT_EQ(a.query, b.query);
  const auto hard = SamplePairs({StrategyKind::kHard}, pool, ratings, 3, 5);
  std::vector<ItemPair> all = a.query;
  all.insert(all.end(), hard.query.begin(), hard.query.end());
  for (auto p : all) {
    EXPECT_TRUE(p.a == 3 || p.a == 7 || p.a == 11);
    EXPECT_TRUE(p.b == 3 || p.b == 7 || p.b == 11);
  }
}

TEST(SamplePairs, RejectsTinyPool) {
  const std::vector<ItemId> pool{0};
  EXPECT_THROW(SamplePairs({StrategyKind::kRandom}, pool, {}, 1, 0), std::invalid_argument);
}

TEST(SamplePairs, HardPseudoSplitsQueryAndPseudo) {
  Rng rng(12);
  std::vector<double> ratings(40);
  for (auto& r : ratings) r = rng.Normal();
  const auto sel = SamplePairs({StrategyKind::kHardPseudo, 256, 2.0}, Pool(40), ratings, 10, 3);
  EXPECT_EQ(sel.query.size(), 10u);
  EXPECT_EQ(sel.pseudo.size(), 20u);
  EXPECT_LT(MeanGap(sel.query, ratings), MeanGap(sel.pseudo, ratings));
}

TEST(StrategyKind, NamesRoundTrip) {
  for (auto kind : {StrategyKind::kRandom, StrategyKind::kEasy, StrategyKind::kHard, StrategyKind::kHardPseudo}) {
    EXPECT_EQ(ParseStrategyKind(ToString(kind)), kind);
  }
  EXPECT_THROW(ParseStrategyKind("medium"), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// pseudo_label

// Ratings whose transitive win probability is exactly p (up to rounding).
std::pair<rater::GaussianRating, rater::GaussianRating> RatingsWithProbability(double p) {
  const double sigma = 0.5;
  const double gap = std::log(p / (1 - p)) * std::sqrt(2.0) * sigma;
  return {{gap, sigma}, {0.0, sigma}};
}

TEST(PseudoLabel, ConfidentPairIsLabeled) {
  auto [a, b] = RatingsWithProbability(0.99);
  const auto c = PseudoLabel(a, b, {4, 9}, {.threshold = 0.9});
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->score_a, 1.0);
  EXPECT_EQ(c->a, 4u);
  const auto d = PseudoLabel(b, a, {9, 4}, {.threshold = 0.9});
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(d->score_a, 0.0);
}

TEST(PseudoLabel, UncertainPairIsDiscarded) {
  auto [a, b] = RatingsWithProbability(0.6);
  EXPECT_FALSE(PseudoLabel(a, b, {0, 1}, {.threshold = 0.9}).has_value());
  EXPECT_FALSE(PseudoLabel(b, a, {1, 0}, {.threshold = 0.9}).has_value());
}

TEST(PseudoLabel, ThresholdIsValidated) {
  auto [a, b] = RatingsWithProbability(0.99);
  EXPECT_THROW(PseudoLabel(a, b, {0, 1}, {.threshold = 0.5}), std::invalid_argument);
  EXPECT_THROW(PseudoLabel(a, b, {0, 1}, {.threshold = 1.5}), std::invalid_argument);
}

PairOracle NoiselessOracle(const synth::SyntheticDataset& data) {
  return [&data](ItemId a, ItemId b) {
    return AnnotateWithNoise(data.oracle.Attribute(a), data.oracle.Attribute(b), 0, 0, 0);
  };
}

TEST(PseudoLabel, AgreesWithNoiselessOracleOnTrainedModel) {
  const auto data = synth::Generate(synth::GeneratorKind::kLinear, 200, 4, 21);
  ActiveLoopConfig cfg;
  cfg.strategy = {StrategyKind::kRandom};
  cfg.budget = 400;
  cfg.encoder.input_dim = 4;
  cfg.encoder.seed = 22;
  cfg.schedule.target_steps = 800;
  cfg.seed = 23;
  const auto result = RunActiveLoop(data.features, NoiselessOracle(data), cfg);
  ASSERT_TRUE(result.model.has_value());

  const auto candidates = SamplePairs({StrategyKind::kRandom}, Pool(200), {}, 2000, 24);
  int labeled = 0;
  int agree = 0;
  for (auto p : candidates.query) {
    const auto c = PseudoLabel(*result.model, data.features, p, {.threshold = 0.9});
    if (!c) continue;
    ++labeled;
    agree += c->score_a == (data.oracle.Attribute(p.a) > data.oracle.Attribute(p.b) ? 1.0 : 0.0) ? 1 : 0;
  }
  ASSERT_GT(labeled, 100);
  EXPECT_GE(static_cast<double>(agree) / labeled, 0.95);
}

// ---------------------------------------------------------------------------
// filter_equal

TEST(FilterEqual, AllTiesGiveEmpty) {
  const std::vector<Comparison> ties{Comparison::Make(0, 1, 0.5), Comparison::Make(2, 1, 0.5)};
  EXPECT_TRUE(FilterEqual(ties).empty());
}

TEST(FilterEqual, KeepsDecisivePairsInOrderAndIsIdempotent) {
  std::vector<Comparison> mixed;
  const double outcomes[] = {1, 0.5, 0, 0, 0.5, 1, 0.5, 1, 0.5, 0};
  for (std::size_t i = 0; i < 10; ++i) mixed.push_back(Comparison::Make(i, i + 1, outcomes[i]));
  const auto kept = FilterEqual(mixed);
  ASSERT_EQ(kept.size(), 6u);
  const std::size_t expected_a[] = {0, 2, 3, 5, 7, 9};
  for (std::size_t i = 0; i < kept.size(); ++i) EXPECT_EQ(kept[i].a, expected_a[i]);
  EXPECT_EQ(FilterEqual(kept), kept);
}

// ---------------------------------------------------------------------------
// comparisons file

TEST(ComparisonsCsv, RoundTrip) {
  const std::vector<Comparison> data{Comparison::Make(0, 5, 1.0), Comparison::Make(5, 2, 0.5),
                                     Comparison::Make(3, 1, 0.0)};
  std::stringstream ss;
  WriteComparisonsCsv(ss, data);
  EXPECT_EQ(ss.str(), "id_a,id_b,outcome\n0,5,1\n5,2,0.5\n3,1,0\n");
  EXPECT_EQ(ReadComparisonsCsv(ss), data);
}

TEST(ComparisonsCsv, RejectsMalformedInput) {
  auto parse = [](const std::string& text) {
    std::stringstream ss(text);
    return ReadComparisonsCsv(ss);
  };
  EXPECT_THROW(parse(""), std::invalid_argument);
  EXPECT_THROW(parse("a,b,c\n"), std::invalid_argument);
  EXPECT_THROW(parse("id_a,id_b,outcome\n0,1,0.7\n"), std::invalid_argument);
  EXPECT_THROW(parse("id_a,id_b,outcome\n0,-1,1\n"), std::invalid_argument);
  EXPECT_THROW(parse("id_a,id_b,outcome\n0,1\n"), std::invalid_argument);
  EXPECT_THROW(parse("id_a,id_b,outcome\n2,2,1\n"), std::invalid_argument);
  EXPECT_EQ(parse("id_a,id_b,outcome\r\n0,1,1\r\n").size(), 1u);
}

// ---------------------------------------------------------------------------
// active loop

TEST(ActiveLoop, HardPseudoNeverQueriesPseudoPairs) {
  const auto data = synth::Generate(synth::GeneratorKind::kLinear, 60, 2, 31);
  long calls = 0;
  const auto base = NoiselessOracle(data);
  PairOracle counting = [&](ItemId a, ItemId b) {
    ++calls;
    return base(a, b);
  };
  ActiveLoopConfig cfg;
  cfg.strategy = {StrategyKind::kHardPseudo};
  cfg.budget = 80;
  cfg.rounds = 3;
  cfg.encoder.input_dim = 2;
  cfg.encoder.hidden = {16};
  cfg.schedule.target_steps = 100;
  cfg.seed = 32;
  const auto result = RunActiveLoop(data.features, counting, cfg);
  EXPECT_EQ(calls, 80);
  EXPECT_EQ(result.oracle_queries, 80);
  EXPECT_EQ(result.queried.size(), 80u);
  EXPECT_FALSE(result.pseudo_labeled.empty());
  for (const auto& c : result.pseudo_labeled) EXPECT_FALSE(c.is_tie());
}

TEST(ActiveLoop, DeterministicUnderSeed) {
  const auto data = synth::Generate(synth::GeneratorKind::kLinear, 40, 2, 41);
  ActiveLoopConfig cfg;
  cfg.strategy = {StrategyKind::kHard};
  cfg.budget = 40;
  cfg.encoder.input_dim = 2;
  cfg.encoder.hidden = {8};
  cfg.schedule.target_steps = 40;
  cfg.seed = 42;
  const auto a = RunActiveLoop(data.features, NoiselessOracle(data), cfg);
  const auto b = RunActiveLoop(data.features, NoiselessOracle(data), cfg);
  EXPECT_EQ(a.queried, b.queried);
  EXPECT_EQ(a.model->ToJson().dump(), b.model->ToJson().dump());
}

}  // namespace
}  // namespace prefrank::pairs
