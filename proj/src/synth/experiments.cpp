#include "prefrank/synth/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "prefrank/common/parallel.hpp"
#include "prefrank/common/random.hpp"
#include "prefrank/synth/metrics.hpp"

namespace prefrank::synth {

using pairs::StrategyKind;
using rater::Comparison;

namespace {

std::vector<ItemId> AllItems(std::size_t n) {
  std::vector<ItemId> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  return pool;
}

std::size_t RoundedBudget(double multiplier, std::size_t n) {
  if (!(multiplier >= 0.0) || !std::isfinite(multiplier)) {
    throw std::invalid_argument("multipliers: must be finite and >= 0");
  }
  return static_cast<std::size_t>(std::llround(multiplier * static_cast<double>(n)));
}

}  // namespace

std::vector<Comparison> AnnotateRandomPairs(const SyntheticDataset& data, const pairs::AnnotatorModel& annotator,
                                            std::size_t count, std::uint64_t seed) {
  std::vector<Comparison> out;
  if (count == 0) return out;
  const auto pool = AllItems(data.size());
  const auto selection = pairs::SamplePairs({StrategyKind::kRandom}, pool, {}, count, seed);
  pairs::Annotator ann(annotator);
  out.reserve(count);
  for (const auto& p : selection.query) {
    out.push_back(Comparison::Make(p.a, p.b, ann.Annotate(data.oracle.Attribute(p.a), data.oracle.Attribute(p.b))));
  }
  return out;
}

pairs::PairOracle NoiselessOracle(const SyntheticDataset& data) {
  return [&data](ItemId a, ItemId b) {
    return pairs::AnnotateWithNoise(data.oracle.Attribute(a), data.oracle.Attribute(b), 0.0, 0.0, 0.0);
  };
}

rater::EncoderModel TrainRater(const SyntheticDataset& data, std::span<const Comparison> comparisons,
                               const RaterSetup& setup, std::uint64_t seed) {
  rater::EncoderConfig cfg = setup.encoder;
  cfg.input_dim = data.dim();
  cfg.seed = seed;
  rater::EncoderModel model(cfg);
  rater::Train(model, data.features, comparisons, setup.schedule.For(comparisons.size()));
  return model;
}

double RatingSpearman(const rater::EncoderModel& model, const SyntheticDataset& data) {
  return Spearman(rater::MeanRatings(model, data.features), data.oracle.attributes());
}

// ---------------------------------------------------------------------------

std::optional<double> LogLogSlope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("LogLogSlope: length mismatch");
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw std::invalid_argument("LogLogSlope: values must be > 0");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  if (lx.size() < 2) return std::nullopt;
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

BudgetCurve PairsBudgetCurve(const BudgetCurveConfig& config) {
  if (config.sizes.empty() || config.multipliers.empty()) {
    throw std::invalid_argument("sizes and multipliers must be non-empty");
  }
  BudgetCurve curve;
  for (std::size_t n : config.sizes) {
    for (double mult : config.multipliers) curve.points.push_back({n, mult, RoundedBudget(mult, n), 0.0});
  }
  ParallelFor(curve.points.size(), config.workers, [&](std::size_t job) {
    BudgetPoint& point = curve.points[job];
    const std::uint64_t job_seed = DeriveSeed(config.seed, job);
    const auto data = Generate(config.kind, point.n, config.dim, DeriveSeed(job_seed, 1));
    const auto comparisons = AnnotateRandomPairs(data, {}, point.pairs, DeriveSeed(job_seed, 2));
    const auto model = TrainRater(data, comparisons, config.rater, DeriveSeed(job_seed, 3));
    point.spearman = RatingSpearman(model, data);
  });

  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t n : config.sizes) {
    std::optional<std::size_t> best;
    for (const auto& p : curve.points) {
      if (p.n != n || p.spearman < config.threshold || p.pairs == 0) continue;
      if (!best || p.pairs < *best) best = p.pairs;
    }
    curve.minimal_pairs.push_back(best);
    if (best) {
      xs.push_back(static_cast<double>(n));
      ys.push_back(static_cast<double>(*best));
    }
  }
  curve.exponent = LogLogSlope(xs, ys);
  return curve;
}

// ---------------------------------------------------------------------------

std::vector<MarginPoint> MarginSweep(const MarginSweepConfig& config) {
  if (config.margins.empty()) throw std::invalid_argument("margins: must be non-empty");
  for (double m : config.margins) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("margins: must be finite and >= 0");
  }
  if (!(config.noise_fraction >= 0.0)) throw std::invalid_argument("noise_fraction: must be >= 0");
  const auto data = Generate(config.kind, config.n, config.dim, DeriveSeed(config.seed, 1));
  const double range = data.oracle.Range();
  const std::size_t budget = RoundedBudget(config.budget_multiplier, config.n);
  const auto pool = AllItems(data.size());
  const auto queried = pairs::SamplePairs({StrategyKind::kRandom}, pool, {}, budget, DeriveSeed(config.seed, 2)).query;
  const double total_pairs = static_cast<double>(config.n) * static_cast<double>(config.n - 1) / 2.0;

  std::vector<MarginPoint> rows(config.margins.size());
  ParallelFor(rows.size(), config.workers, [&](std::size_t k) {
    const double margin = config.margins[k];
    pairs::Annotator ann({.tie_margin = margin * range,
                          .noise_half_width = config.noise_fraction * range,
                          .seed = DeriveSeed(config.seed, 3, k)});
    std::vector<Comparison> comparisons;
    comparisons.reserve(queried.size());
    std::size_t ties = 0;
    for (const auto& p : queried) {
      const double s = ann.Annotate(data.oracle.Attribute(p.a), data.oracle.Attribute(p.b));
      ties += s == 0.5 ? 1 : 0;
      comparisons.push_back(Comparison::Make(p.a, p.b, s));
    }
    const auto model = TrainRater(data, comparisons, config.rater, DeriveSeed(config.seed, 4));
    const auto ratings = rater::MeanRatings(model, data.features);
    MarginPoint& row = rows[k];
    row.margin = margin;
    row.rating_spearman = Spearman(ratings, data.oracle.attributes());
    row.tie_fraction = queried.empty() ? 0.0 : static_cast<double>(ties) / static_cast<double>(queried.size());
    row.normalized_risk = ExpectedRisk(ratings, data.oracle).total / total_pairs;
  });
  return rows;
}

std::vector<NoisePoint> NoiseResistanceCurve(const MarginSweepConfig& config) {
  const auto sweep = MarginSweep(config);
  const auto data = Generate(config.kind, config.n, config.dim, DeriveSeed(config.seed, 1));
  const double range = data.oracle.Range();
  std::vector<NoisePoint> rows;
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    const double half = 0.5 * sweep[k].margin * range;
    Rng rng(DeriveSeed(config.seed, 5, k));
    std::vector<double> noisy = data.oracle.attributes();
    if (half > 0.0) {
      for (auto& v : noisy) v += rng.Uniform(-half, half);
    }
    rows.push_back({sweep[k].margin, sweep[k].rating_spearman, Spearman(data.oracle.attributes(), noisy)});
  }
  return rows;
}

double Degradation(std::span<const double> curve) {
  if (curve.empty()) throw std::invalid_argument("Degradation: empty curve");
  return curve.front() - curve.back();
}

// ---------------------------------------------------------------------------

std::vector<StrategyRow> StrategyTable(const StrategyTableConfig& config) {
  if (config.strategies.empty()) throw std::invalid_argument("strategies: must be non-empty");
  const auto data = Generate(config.kind, config.n, config.dim, DeriveSeed(config.seed, 1));
  std::vector<StrategyRow> rows(config.strategies.size());
  ParallelFor(rows.size(), config.workers, [&](std::size_t k) {
    pairs::ActiveLoopConfig loop;
    loop.strategy = {config.strategies[k], config.candidate_pool, config.pseudo_per_query};
    loop.budget = config.budget;
    loop.rounds = config.rounds;
    loop.warmup_fraction = config.warmup_fraction;
    loop.pseudo = config.pseudo;
    loop.encoder = config.rater.encoder;
    loop.encoder.input_dim = data.dim();
    loop.encoder.seed = DeriveSeed(config.seed, 3);
    loop.schedule = config.rater.schedule;
    loop.seed = DeriveSeed(config.seed, 2);
    const auto result = pairs::RunActiveLoop(data.features, NoiselessOracle(data), loop);
    rows[k] = {config.strategies[k], RatingSpearman(*result.model, data), result.oracle_queries,
               result.pseudo_labeled.size()};
  });
  return rows;
}

// ---------------------------------------------------------------------------

UncertaintyShape UncertaintyByTercile(const UncertaintyShapeConfig& config) {
  const auto data = Generate(config.kind, config.n, config.dim, DeriveSeed(config.seed, 1));
  pairs::AnnotatorModel annotator = config.annotator;
  const double range = data.oracle.Range();
  annotator.tie_margin *= range;
  annotator.noise_half_width *= range;
  annotator.seed = DeriveSeed(config.seed, 2);
  const auto comparisons = AnnotateRandomPairs(data, annotator, config.budget, DeriveSeed(config.seed, 3));
  const auto model = TrainRater(data, comparisons, config.rater, DeriveSeed(config.seed, 4));
  const auto estimates =
      rater::PredictWithUncertainty(model, data.features, model.config().predict_passes, DeriveSeed(config.seed, 5));

  std::vector<ItemId> order = AllItems(data.size());
  const auto& omega = data.oracle.attributes();
  std::stable_sort(order.begin(), order.end(), [&](ItemId a, ItemId b) { return omega[a] < omega[b]; });
  const std::size_t third = data.size() / 3;
  auto mean_sd = [&](std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += std::sqrt(estimates[order[i]].total);
    return s / static_cast<double>(end - begin);
  };
  UncertaintyShape shape;
  const std::size_t n = data.size();
  shape.low = mean_sd(0, third);
  shape.middle = mean_sd(third, n - third);
  shape.high = mean_sd(n - third, n);
  shape.extremes = (shape.low * static_cast<double>(third) + shape.high * static_cast<double>(third)) /
                   static_cast<double>(2 * third);
  std::vector<double> means;
  for (const auto& e : estimates) means.push_back(e.mean);
  shape.spearman = Spearman(means, omega);
  return shape;
}

// ---------------------------------------------------------------------------

void WriteCsv(std::ostream& out, const BudgetCurve& curve) {
  out << std::setprecision(10) << "n,multiplier,pairs,spearman\n";
  for (const auto& p : curve.points) out << p.n << ',' << p.multiplier << ',' << p.pairs << ',' << p.spearman << '\n';
}

void WriteCsv(std::ostream& out, std::span<const MarginPoint> rows) {
  out << std::setprecision(10) << "margin,rating_spearman,tie_fraction,normalized_risk\n";
  for (const auto& r : rows) {
    out << r.margin << ',' << r.rating_spearman << ',' << r.tie_fraction << ',' << r.normalized_risk << '\n';
  }
}

void WriteCsv(std::ostream& out, std::span<const NoisePoint> rows) {
  out << std::setprecision(10) << "margin,rating_spearman,label_spearman\n";
  for (const auto& r : rows) out << r.margin << ',' << r.rating_spearman << ',' << r.label_spearman << '\n';
}

void WriteCsv(std::ostream& out, std::span<const StrategyRow> rows) {
  out << std::setprecision(10) << "strategy,spearman,oracle_queries,pseudo_labeled\n";
  for (const auto& r : rows) {
    out << pairs::ToString(r.strategy) << ',' << r.spearman << ',' << r.oracle_queries << ',' << r.pseudo_labeled
        << '\n';
  }
}

}  // namespace prefrank::synth
