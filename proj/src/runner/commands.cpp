#include "commands.hpp"

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "prefrank/common/random.hpp"
#include "prefrank/congen/congen.hpp"
#include "prefrank/pairs/comparisons_io.hpp"
#include "prefrank/runner/config.hpp"
#include "prefrank/service/http_server.hpp"
#include "prefrank/service/session.hpp"
#include "prefrank/synth/dataset_io.hpp"
#include "prefrank/synth/experiments.hpp"
#include "prefrank/synth/metrics.hpp"

namespace prefrank::runner {
namespace {

using nlohmann::json;
using synth::FormatDouble;

// Runs `f`, turning validation failures into a ConfigError on `field`.
template <typename F>
auto Checked(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(field, e.what());
  }
}

std::string RequiredPath(const json& config, const std::string& key) {
  auto path = Get<std::string>(config, key);
  if (path.empty()) throw ConfigError(key, "required");
  return path;
}

void Require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

template <typename F>
void WriteWith(OutputDir& out, const std::string& name, F&& write) {
  std::ostringstream s;
  write(s);
  out.Write(name, s.str());
}

json ReadJsonFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("invalid JSON in '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Shared config sections.

json EncoderDefaults() {
  json j = rater::EncoderConfig{}.ToJson();
  j.erase("input_dim");
  j.erase("seed");
  return j;
}

// Input width and seed are filled in at run time.
rater::EncoderConfig ParseEncoder(const json& config) {
  json j = config.at("encoder");
  j["input_dim"] = 1;
  j["seed"] = 0;
  return Checked("encoder", [&] { return rater::EncoderConfig::FromJson(j); });
}

json ScheduleDefaults() {
  const rater::TrainSchedule s;
  return {{"target_steps", s.target_steps},
          {"batch_size", s.batch_size},
          {"min_epochs", s.min_epochs},
          {"max_epochs", s.max_epochs}};
}

rater::TrainSchedule ParseSchedule(const json& config) {
  rater::TrainSchedule s;
  s.target_steps = Get<long>(config, "schedule.target_steps");
  s.batch_size = Get<int>(config, "schedule.batch_size");
  s.min_epochs = Get<int>(config, "schedule.min_epochs");
  s.max_epochs = Get<int>(config, "schedule.max_epochs");
  Require(s.target_steps > 0, "schedule.target_steps", "must be > 0");
  Require(s.batch_size > 0, "schedule.batch_size", "must be > 0");
  Require(s.min_epochs >= 1, "schedule.min_epochs", "must be >= 1");
  Require(s.max_epochs >= s.min_epochs, "schedule.max_epochs", "must be >= schedule.min_epochs");
  return s;
}

synth::RaterSetup ParseRaterSetup(const json& config) {
  return {ParseEncoder(config), ParseSchedule(config)};
}

synth::GeneratorKind ParseKind(const json& config) {
  return Checked("kind", [&] { return synth::ParseGeneratorKind(Get<std::string>(config, "kind")); });
}

int ParseDim(const json& config, synth::GeneratorKind kind) {
  const int dim = Get<int>(config, "dim");
  Require(dim >= 1, "dim", "must be >= 1");
  Require(kind != synth::GeneratorKind::kRing || dim >= 2, "dim", "ring data needs dim >= 2");
  return dim;
}

std::size_t ParseWorkers(const json& config) { return Get<std::size_t>(config, "workers"); }

std::vector<FlagSpec> EncoderFlags() {
  return {{"loss", "encoder.loss", FlagKind::kString, "Ranking loss: mc or ub"},
          {"dropout", "encoder.dropout", FlagKind::kDouble, "Encoder dropout rate"},
          {"target-steps", "schedule.target_steps", FlagKind::kInt, "Optimizer steps per training run"}};
}

std::vector<FlagSpec> DataFlags() {
  return {{"kind", "kind", FlagKind::kString, "Generator: linear, radial or ring"},
          {"dim", "dim", FlagKind::kInt, "Feature dimension"}};
}

template <typename... Lists>
std::vector<FlagSpec> Concat(std::vector<FlagSpec> first, const Lists&... rest) {
  (first.insert(first.end(), rest.begin(), rest.end()), ...);
  return first;
}

// Wraps loaded features and a loaded oracle file as a data set.
synth::SyntheticDataset WithOracle(diffcore::Tensor features, std::vector<double> omega) {
  if (omega.size() != static_cast<std::size_t>(features.rows())) {
    throw std::runtime_error("oracle has " + std::to_string(omega.size()) + " items, data set has " +
                             std::to_string(features.rows()));
  }
  synth::SyntheticDataset data;
  data.features = std::move(features);
  data.oracle = synth::Oracle(synth::GeneratorKind::kLinear, {}, std::move(omega));
  return data;
}

rater::EncoderModel LoadRater(const std::string& path, const diffcore::Tensor& features) {
  auto model = rater::EncoderModel::FromJson(ReadJsonFile(path));
  if (model.config().input_dim != features.cols()) {
    throw std::runtime_error("rater expects " + std::to_string(model.config().input_dim) +
                             " features, data set has " + std::to_string(features.cols()));
  }
  return model;
}

// ---------------------------------------------------------------------------

Command GenData() {
  Command c;
  c.name = "gen-data";
  c.help = "Generate a synthetic data set (dataset.csv, oracle.csv)";
  c.defaults = [] { return json{{"seed", 0u}, {"kind", "linear"}, {"n", 500u}, {"dim", 2}}; };
  c.flags = Concat(DataFlags(), std::vector<FlagSpec>{{"n", "n", FlagKind::kUint, "Number of items"}});
  c.prepare = [](const json& config) -> Execution {
    const auto seed = Get<std::uint64_t>(config, "seed");
    const auto kind = ParseKind(config);
    const int dim = ParseDim(config, kind);
    const auto n = Get<std::size_t>(config, "n");
    Require(n >= 2, "n", "must be >= 2");
    return [=](OutputDir& out, std::ostream& log) {
      const auto data = synth::Generate(kind, n, dim, seed);
      WriteWith(out, "dataset.csv", [&](std::ostream& s) { synth::WriteFeaturesCsv(s, data.features); });
      WriteWith(out, "oracle.csv", [&](std::ostream& s) { synth::WriteOracleCsv(s, data.oracle.attributes()); });
      log << "generated " << n << " " << synth::ToString(kind) << " items in " << dim << " dimensions\n";
    };
  };
  return c;
}

Command TrainRaterCommand() {
  Command c;
  c.name = "train-rater";
  c.help = "Train a rater from comparisons or from oracle-annotated random pairs";
  c.defaults = [] {
    return json{{"seed", 0u},
                {"dataset", ""},
                {"oracle", ""},
                {"comparisons", ""},
                {"pairs", 1000u},
                {"annotator", {{"tie_margin", 0.0}, {"noise_half_width", 0.0}}},
                {"encoder", EncoderDefaults()},
                {"schedule", ScheduleDefaults()}};
  };
  c.flags = Concat(std::vector<FlagSpec>{{"dataset", "dataset", FlagKind::kString, "Features CSV"},
                                         {"oracle", "oracle", FlagKind::kString,
                                          "Oracle CSV used to annotate random pairs"},
                                         {"comparisons", "comparisons", FlagKind::kString,
                                          "Comparisons CSV (takes precedence over the oracle)"},
                                         {"pairs", "pairs", FlagKind::kUint, "Random pairs to annotate"},
                                         {"tie-margin", "annotator.tie_margin", FlagKind::kDouble,
                                          "Annotator tie margin, fraction of the attribute range"},
                                         {"noise", "annotator.noise_half_width", FlagKind::kDouble,
                                          "Annotator noise half-width, fraction of the attribute range"}},
                   EncoderFlags());
  c.prepare = [](const json& config) -> Execution {
    const auto seed = Get<std::uint64_t>(config, "seed");
    const auto dataset = RequiredPath(config, "dataset");
    const auto comparisons = Get<std::string>(config, "comparisons");
    const auto oracle = Get<std::string>(config, "oracle");
    Require(!comparisons.empty() || !oracle.empty(), "oracle", "required when comparisons is empty");
    const auto pairs = Get<std::size_t>(config, "pairs");
    pairs::AnnotatorModel annotator{Get<double>(config, "annotator.tie_margin"),
                                    Get<double>(config, "annotator.noise_half_width"), DeriveSeed(seed, 2)};
    Checked("annotator", [&] { annotator.Validate(); });
    const auto setup = ParseRaterSetup(config);
    return [=](OutputDir& out, std::ostream& log) {
      auto features = synth::LoadFeatures(dataset);
      std::vector<rater::Comparison> comps;
      if (!comparisons.empty()) {
        comps = pairs::LoadComparisons(comparisons);
      } else {
        const auto data = WithOracle(features, synth::LoadOracle(oracle));
        pairs::AnnotatorModel scaled = annotator;
        scaled.tie_margin *= data.oracle.Range();
        scaled.noise_half_width *= data.oracle.Range();
        comps = synth::AnnotateRandomPairs(data, scaled, pairs, DeriveSeed(seed, 0));
      }
      rater::EncoderConfig enc = setup.encoder;
      enc.input_dim = static_cast<int>(features.cols());
      enc.seed = DeriveSeed(seed, 1);
      rater::EncoderModel model(enc);
      const auto report = rater::Train(model, features, comps, setup.schedule.For(comps.size()));
      WriteWith(out, "comparisons.csv", [&](std::ostream& s) { pairs::WriteComparisonsCsv(s, comps); });
      out.Write("rater.json", model.ToJson().dump() + "\n");
      WriteWith(out, "train_loss.csv", [&](std::ostream& s) {
        s << "epoch,loss\n";
        for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
          s << e << "," << FormatDouble(report.epoch_loss[e]) << "\n";
        }
      });
      log << "trained on " << comps.size() << " comparisons for " << report.epoch_loss.size() << " epochs ("
          << report.steps << " steps)\n";
    };
  };
  return c;
}

Command EvalRater() {
  Command c;
  c.name = "eval-rater";
  c.help = "Predict ratings with uncertainty; score against an oracle if given";
  c.defaults = [] { return json{{"seed", 0u}, {"dataset", ""}, {"rater", ""}, {"oracle", ""}, {"passes", 20}}; };
  c.flags = {{"dataset", "dataset", FlagKind::kString, "Features CSV"},
             {"rater", "rater", FlagKind::kString, "rater.json from train-rater"},
             {"oracle", "oracle", FlagKind::kString, "Oracle CSV (optional)"},
             {"passes", "passes", FlagKind::kInt, "Stochastic passes for uncertainty"}};
  c.prepare = [](const json& config) -> Execution {
    const auto seed = Get<std::uint64_t>(config, "seed");
    const auto dataset = RequiredPath(config, "dataset");
    const auto rater_path = RequiredPath(config, "rater");
    const auto oracle = Get<std::string>(config, "oracle");
    const int passes = Get<int>(config, "passes");
    Require(passes >= 1, "passes", "must be >= 1");
    return [=](OutputDir& out, std::ostream& log) {
      const auto features = synth::LoadFeatures(dataset);
      const auto model = LoadRater(rater_path, features);
      const auto estimates = rater::PredictWithUncertainty(model, features, passes, DeriveSeed(seed, 0));
      const auto means = rater::MeanRatings(model, features);
      WriteWith(out, "ratings.csv", [&](std::ostream& s) {
        s << "id,mean,epistemic,aleatoric,deterministic_mean\n";
        for (std::size_t i = 0; i < estimates.size(); ++i) {
          s << i << "," << FormatDouble(estimates[i].mean) << "," << FormatDouble(estimates[i].epistemic) << ","
            << FormatDouble(estimates[i].aleatoric) << "," << FormatDouble(means[i]) << "\n";
        }
      });
      json metrics = {{"items", estimates.size()}, {"passes", passes}};
      if (!oracle.empty()) {
        const auto data = WithOracle(features, synth::LoadOracle(oracle));
        const double n = static_cast<double>(data.size());
        metrics["spearman"] = synth::Spearman(means, data.oracle.attributes());
        metrics["normalized_risk"] = synth::ExpectedRisk(means, data.oracle).total / (n * (n - 1.0) / 2.0);
        log << "spearman " << metrics["spearman"].get<double>() << "\n";
      }
      out.Write("metrics.json", metrics.dump(2) + "\n");
      log << "rated " << estimates.size() << " items\n";
    };
  };
  return c;
}

json GridDefaults() {
  return json{{"seed", 0u},    {"workers", 1u},
              {"kind", "linear"}, {"dim", 8},
              {"encoder", EncoderDefaults()}, {"schedule", ScheduleDefaults()}};
}

std::vector<FlagSpec> GridFlags() {
  return Concat(DataFlags(), EncoderFlags(),
                std::vector<FlagSpec>{{"workers", "workers", FlagKind::kUint, "Parallel jobs (0 = all cores)"}});
}

Command PairsCurve() {
  Command c;
  c.name = "pairs-curve";
  c.help = "Rating quality against the number of random pairs";
  c.defaults = [] {
    const synth::BudgetCurveConfig d;
    json j = GridDefaults();
    j["n"] = d.sizes;
    j["mult"] = d.multipliers;
    j["threshold"] = d.threshold;
    return j;
  };
  c.flags = Concat(GridFlags(), std::vector<FlagSpec>{
                                    {"n", "n", FlagKind::kUintList, "Comma-separated data set sizes"},
                                    {"mult", "mult", FlagKind::kDoubleList, "Comma-separated budget multipliers"},
                                    {"threshold", "threshold", FlagKind::kDouble, "Spearman target for m*"}});
  c.prepare = [](const json& config) -> Execution {
    synth::BudgetCurveConfig cfg;
    cfg.seed = Get<std::uint64_t>(config, "seed");
    cfg.workers = ParseWorkers(config);
    cfg.kind = ParseKind(config);
    cfg.dim = ParseDim(config, cfg.kind);
    cfg.sizes = Get<std::vector<std::size_t>>(config, "n");
    cfg.multipliers = Get<std::vector<double>>(config, "mult");
    cfg.threshold = Get<double>(config, "threshold");
    cfg.rater = ParseRaterSetup(config);
    Require(!cfg.sizes.empty(), "n", "must be non-empty");
    Require(std::all_of(cfg.sizes.begin(), cfg.sizes.end(), [](auto n) { return n >= 2; }), "n",
            "every size must be >= 2");
    Require(!cfg.multipliers.empty(), "mult", "must be non-empty");
    Require(std::all_of(cfg.multipliers.begin(), cfg.multipliers.end(), [](double m) { return m >= 0.0; }),
            "mult", "multipliers must be >= 0");
    return [=](OutputDir& out, std::ostream& log) {
      const auto curve = synth::PairsBudgetCurve(cfg);
      WriteWith(out, "pairs_curve.csv", [&](std::ostream& s) { synth::WriteCsv(s, curve); });
      json minimal = json::array();
      for (std::size_t i = 0; i < cfg.sizes.size(); ++i) {
        minimal.push_back({{"n", cfg.sizes[i]},
                           {"pairs", curve.minimal_pairs[i] ? json(*curve.minimal_pairs[i]) : json(nullptr)}});
      }
      const json summary = {{"threshold", cfg.threshold},
                            {"minimal_pairs", minimal},
                            {"exponent", curve.exponent ? json(*curve.exponent) : json(nullptr)}};
      out.Write("summary.json", summary.dump(2) + "\n");
      log << curve.points.size() << " grid points\n";
    };
  };
  return c;
}

json MarginDefaults() {
  const synth::MarginSweepConfig d;
  json j = GridDefaults();
  j["n"] = d.n;
  j["budget_multiplier"] = d.budget_multiplier;
  j["margins"] = d.margins;
  j["noise_fraction"] = d.noise_fraction;
  return j;
}

std::vector<FlagSpec> MarginFlags() {
  return Concat(GridFlags(),
                std::vector<FlagSpec>{
                    {"n", "n", FlagKind::kUint, "Number of items"},
                    {"budget-mult", "budget_multiplier", FlagKind::kDouble, "Random pairs per item"},
                    {"margins", "margins", FlagKind::kDoubleList, "Comma-separated tie margins (range fractions)"},
                    {"noise", "noise_fraction", FlagKind::kDouble, "Annotator noise half-width (range fraction)"}});
}

synth::MarginSweepConfig ParseMargin(const json& config) {
  synth::MarginSweepConfig cfg;
  cfg.seed = Get<std::uint64_t>(config, "seed");
  cfg.workers = ParseWorkers(config);
  cfg.kind = ParseKind(config);
  cfg.dim = ParseDim(config, cfg.kind);
  cfg.n = Get<std::size_t>(config, "n");
  cfg.budget_multiplier = Get<double>(config, "budget_multiplier");
  cfg.margins = Get<std::vector<double>>(config, "margins");
  cfg.noise_fraction = Get<double>(config, "noise_fraction");
  cfg.rater = ParseRaterSetup(config);
  Require(cfg.n >= 2, "n", "must be >= 2");
  Require(cfg.budget_multiplier > 0.0, "budget_multiplier", "must be > 0");
  Require(!cfg.margins.empty(), "margins", "must be non-empty");
  Require(std::all_of(cfg.margins.begin(), cfg.margins.end(), [](double m) { return m >= 0.0; }), "margins",
          "margins must be >= 0");
  Require(cfg.noise_fraction >= 0.0, "noise_fraction", "must be >= 0");
  return cfg;
}

Command MarginSweepCommand() {
  Command c;
  c.name = "margin-sweep";
  c.help = "Rating quality, tie fraction and ranking risk against the tie margin";
  c.defaults = MarginDefaults;
  c.flags = MarginFlags();
  c.prepare = [](const json& config) -> Execution {
    const auto cfg = ParseMargin(config);
    return [=](OutputDir& out, std::ostream& log) {
      const auto rows = synth::MarginSweep(cfg);
      WriteWith(out, "margin_sweep.csv", [&](std::ostream& s) { synth::WriteCsv(s, rows); });
      log << rows.size() << " margins\n";
    };
  };
  return c;
}

Command NoiseCurve() {
  Command c;
  c.name = "noise-curve";
  c.help = "Rating vs label degradation under annotator noise";
  c.defaults = MarginDefaults;
  c.flags = MarginFlags();
  c.prepare = [](const json& config) -> Execution {
    const auto cfg = ParseMargin(config);
    return [=](OutputDir& out, std::ostream& log) {
      const auto rows = synth::NoiseResistanceCurve(cfg);
      WriteWith(out, "noise_curve.csv", [&](std::ostream& s) { synth::WriteCsv(s, rows); });
      std::vector<double> rating;
      std::vector<double> label;
      for (const auto& r : rows) {
        rating.push_back(r.rating_spearman);
        label.push_back(r.label_spearman);
      }
      const json summary = {{"rating_degradation", synth::Degradation(rating)},
                            {"label_degradation", synth::Degradation(label)}};
      out.Write("summary.json", summary.dump(2) + "\n");
      log << rows.size() << " margins\n";
    };
  };
  return c;
}

Command StrategyTableCommand() {
  Command c;
  c.name = "strategy-table";
  c.help = "Compare pair-sampling strategies at a fixed oracle budget";
  c.defaults = [] {
    const synth::StrategyTableConfig d;
    json j = GridDefaults();
    json names = json::array();
    for (auto k : d.strategies) names.push_back(pairs::ToString(k));
    j["n"] = d.n;
    j["budget"] = d.budget;
    j["strategies"] = names;
    j["rounds"] = d.rounds;
    j["warmup_fraction"] = d.warmup_fraction;
    j["candidate_pool"] = d.candidate_pool;
    j["pseudo_per_query"] = d.pseudo_per_query;
    j["pseudo_threshold"] = d.pseudo.threshold;
    return j;
  };
  c.flags = Concat(GridFlags(), std::vector<FlagSpec>{
                                    {"n", "n", FlagKind::kUint, "Number of items"},
                                    {"budget", "budget", FlagKind::kUint, "Oracle queries per strategy"},
                                    {"strategies", "strategies", FlagKind::kStringList,
                                     "Comma-separated strategies: random, easy, hard, hard+pseudo"},
                                    {"rounds", "rounds", FlagKind::kInt, "Collection rounds"}});
  c.prepare = [](const json& config) -> Execution {
    synth::StrategyTableConfig cfg;
    cfg.seed = Get<std::uint64_t>(config, "seed");
    cfg.workers = ParseWorkers(config);
    cfg.kind = ParseKind(config);
    cfg.dim = ParseDim(config, cfg.kind);
    cfg.n = Get<std::size_t>(config, "n");
    cfg.budget = Get<std::size_t>(config, "budget");
    cfg.strategies.clear();
    for (const auto& name : Get<std::vector<std::string>>(config, "strategies")) {
      cfg.strategies.push_back(Checked("strategies", [&] { return pairs::ParseStrategyKind(name); }));
    }
    cfg.rounds = Get<int>(config, "rounds");
    cfg.warmup_fraction = Get<double>(config, "warmup_fraction");
    cfg.candidate_pool = Get<std::size_t>(config, "candidate_pool");
    cfg.pseudo_per_query = Get<double>(config, "pseudo_per_query");
    cfg.pseudo.threshold = Get<double>(config, "pseudo_threshold");
    cfg.rater = ParseRaterSetup(config);
    Require(cfg.n >= 2, "n", "must be >= 2");
    Require(cfg.budget >= 1, "budget", "must be >= 1");
    Require(!cfg.strategies.empty(), "strategies", "must be non-empty");
    Require(cfg.rounds >= 1, "rounds", "must be >= 1");
    Require(cfg.warmup_fraction > 0.0 && cfg.warmup_fraction <= 1.0, "warmup_fraction", "must be in (0, 1]");
    Require(cfg.candidate_pool >= 1, "candidate_pool", "must be >= 1");
    Require(cfg.pseudo_per_query >= 0.0, "pseudo_per_query", "must be >= 0");
    Checked("pseudo_threshold", [&] { cfg.pseudo.Validate(); });
    return [=](OutputDir& out, std::ostream& log) {
      const auto rows = synth::StrategyTable(cfg);
      WriteWith(out, "strategy_table.csv", [&](std::ostream& s) { synth::WriteCsv(s, rows); });
      log << rows.size() << " strategies\n";
    };
  };
  return c;
}

// ---------------------------------------------------------------------------
// Conditional generator.

struct GanInputs {
  std::string dataset;
  std::string rater;
  std::string comparisons;
  int passes = 20;
};

GanInputs ParseGanInputs(const json& config) {
  GanInputs in;
  in.dataset = RequiredPath(config, "dataset");
  in.rater = RequiredPath(config, "rater");
  in.comparisons = RequiredPath(config, "comparisons");
  in.passes = Get<int>(config, "passes");
  Require(in.passes >= 1, "passes", "must be >= 1");
  return in;
}

struct GanContext {
  congen::FrozenRater rater;
  congen::GanData data;
};

GanContext LoadGanContext(const GanInputs& in, std::uint64_t seed) {
  const auto features = synth::LoadFeatures(in.dataset);
  congen::FrozenRater rater(LoadRater(in.rater, features));
  const auto comps = pairs::LoadComparisons(in.comparisons);
  auto data = congen::BuildGanData(features, comps, rater, in.passes, DeriveSeed(seed, 0));
  return {std::move(rater), std::move(data)};
}

json GanInputDefaults() {
  return json{{"seed", 0u}, {"dataset", ""}, {"rater", ""}, {"comparisons", ""}, {"passes", 20}};
}

std::vector<FlagSpec> GanInputFlags() {
  return {{"dataset", "dataset", FlagKind::kString, "Features CSV (two columns)"},
          {"rater", "rater", FlagKind::kString, "rater.json from train-rater"},
          {"comparisons", "comparisons", FlagKind::kString, "Comparisons the rater was trained on"},
          {"passes", "passes", FlagKind::kInt, "Stochastic rater passes for uncertainty"}};
}

congen::GanModel LoadGan(const std::string& path) { return congen::GanModel::FromJson(ReadJsonFile(path)); }

Command TrainCgen() {
  Command c;
  c.name = "train-cgen";
  c.help = "Train the rating-conditioned generator against a frozen rater";
  c.defaults = [] {
    json j = GanInputDefaults();
    json gan = congen::GanConfig{}.ToJson();
    gan.erase("seed");
    j["gan"] = gan;
    return j;
  };
  c.flags = Concat(GanInputFlags(),
                   std::vector<FlagSpec>{
                       {"steps", "gan.steps", FlagKind::kInt, "Generator updates"},
                       {"lambda-rec", "gan.lambda_rec", FlagKind::kDouble, "Rating reconstruction weight"},
                       {"lambda-cyc", "gan.lambda_cyc", FlagKind::kDouble, "Cycle consistency weight"},
                       {"corruption", "gan.corruption", FlagKind::kString, "Label corruption: total, aleatoric, off"},
                       {"conditioning-noise", "gan.conditioning_noise", FlagKind::kDouble,
                        "Noise std on real-branch ratings"}});
  c.prepare = [](const json& config) -> Execution {
    const auto seed = Get<std::uint64_t>(config, "seed");
    const auto inputs = ParseGanInputs(config);
    json gan_json = config.at("gan");
    gan_json["seed"] = DeriveSeed(seed, 1);
    const auto gan_config = Checked("gan", [&] { return congen::GanConfig::FromJson(gan_json); });
    return [=](OutputDir& out, std::ostream& log) {
      const auto ctx = LoadGanContext(inputs, seed);
      const auto model = congen::TrainGan(gan_config, ctx.data, ctx.rater);
      out.Write("gan.json", model.ToJson().dump() + "\n");
      WriteWith(out, "trace.csv", [&](std::ostream& s) {
        const auto& t = model.trace;
        s << "step,loss_d,loss_g_adv,loss_rec,loss_cyc\n";
        for (std::size_t i = 0; i < t.loss_d.size(); ++i) {
          s << i << "," << FormatDouble(t.loss_d[i]) << "," << FormatDouble(t.loss_g_adv[i]) << ","
            << FormatDouble(t.loss_rec[i]) << "," << FormatDouble(t.loss_cyc[i]) << "\n";
        }
      });
      log << "trained for " << gan_config.steps << " steps on " << ctx.data.pairs.size() << " pairs\n";
    };
  };
  return c;
}

Command EvalCgen() {
  Command c;
  c.name = "eval-cgen";
  c.help = "Attribute error, cycle error, self-edit and sweep monotonicity of a generator";
  c.defaults = [] {
    const congen::EvaluationOptions d;
    json j = GanInputDefaults();
    j["gan"] = "";
    j["pairs"] = d.pairs;
    j["sweep_items"] = d.sweep_items;
    j["sweep_points"] = d.sweep_points;
    return j;
  };
  c.flags = Concat(GanInputFlags(), std::vector<FlagSpec>{{"gan", "gan", FlagKind::kString, "gan.json"},
                                                          {"pairs", "pairs", FlagKind::kUint, "Evaluation pairs"}});
  c.prepare = [](const json& config) -> Execution {
    const auto seed = Get<std::uint64_t>(config, "seed");
    const auto inputs = ParseGanInputs(config);
    const auto gan_path = RequiredPath(config, "gan");
    congen::EvaluationOptions opts;
    opts.pairs = Get<std::size_t>(config, "pairs");
    opts.sweep_items = Get<std::size_t>(config, "sweep_items");
    opts.sweep_points = Get<int>(config, "sweep_points");
    opts.seed = DeriveSeed(seed, 2);
    Require(opts.pairs >= 1, "pairs", "must be >= 1");
    Require(opts.sweep_items >= 1, "sweep_items", "must be >= 1");
    Require(opts.sweep_points >= 2, "sweep_points", "must be >= 2");
    return [=](OutputDir& out, std::ostream& log) {
      const auto ctx = LoadGanContext(inputs, seed);
      const auto model = LoadGan(gan_path);
      const auto e = congen::EvaluateGan(model.generator, ctx.rater, ctx.data, opts);
      const json result = {{"attribute_error", e.attribute_error},
                           {"cycle_error", e.cycle_error},
                           {"self_edit", e.self_edit},
                           {"sweep_spearman", e.sweep_spearman}};
      out.Write("eval.json", result.dump(2) + "\n");
      log << result.dump() << "\n";
    };
  };
  return c;
}

Command EditSweepCommand() {
  Command c;
  c.name = "edit-sweep";
  c.help = "Edit items along a sweep of target ratings (CSV for plotting)";
  c.defaults = [] {
    json j = GanInputDefaults();
    j["gan"] = "";
    j["count"] = 10u;
    j["points"] = 21;
    return j;
  };
  c.flags = Concat(GanInputFlags(), std::vector<FlagSpec>{{"gan", "gan", FlagKind::kString, "gan.json"},
                                                          {"count", "count", FlagKind::kUint, "Items to sweep"},
                                                          {"points", "points", FlagKind::kInt, "Targets per item"}});
  c.prepare = [](const json& config) -> Execution {
    const auto seed = Get<std::uint64_t>(config, "seed");
    const auto inputs = ParseGanInputs(config);
    const auto gan_path = RequiredPath(config, "gan");
    const auto count = Get<std::size_t>(config, "count");
    const int points = Get<int>(config, "points");
    Require(count >= 1, "count", "must be >= 1");
    Require(points >= 2, "points", "must be >= 2");
    return [=](OutputDir& out, std::ostream& log) {
      const auto ctx = LoadGanContext(inputs, seed);
      const auto model = LoadGan(gan_path);
      std::vector<rater::ItemId> items(ctx.data.ratings.size());
      std::iota(items.begin(), items.end(), 0);
      Rng rng(DeriveSeed(seed, 1));
      std::shuffle(items.begin(), items.end(), rng.engine());
      items.resize(std::min(count, items.size()));
      const auto rows = congen::EditSweep(model.generator, ctx.rater, ctx.data, items, points);
      WriteWith(out, "edit_sweep.csv", [&](std::ostream& s) { congen::WriteEditSweepCsv(s, rows); });
      log << items.size() << " items x " << points << " targets\n";
    };
  };
  return c;
}

Command DoptCheck() {
  Command c;
  c.name = "dopt-check";
  c.help = "Train a discriminator on a discrete toy problem and compare with p/(p+q)";
  c.defaults = [] {
    const congen::DoptConfig d;
    return json{{"seed", 0u},
                {"bins", 16},
                {"steps", d.steps},
                {"batch_size", d.batch_size},
                {"learning_rate", d.learning_rate}};
  };
  c.flags = {{"bins", "bins", FlagKind::kInt, "Number of bins"},
             {"steps", "steps", FlagKind::kInt, "Discriminator updates"}};
  c.prepare = [](const json& config) -> Execution {
    const auto seed = Get<std::uint64_t>(config, "seed");
    const int bins = Get<int>(config, "bins");
    congen::DoptConfig cfg;
    cfg.steps = Get<int>(config, "steps");
    cfg.batch_size = Get<int>(config, "batch_size");
    cfg.learning_rate = Get<double>(config, "learning_rate");
    cfg.seed = DeriveSeed(seed, 1);
    Require(bins >= 1, "bins", "must be >= 1");
    Require(cfg.steps >= 1, "steps", "must be >= 1");
    Require(cfg.batch_size >= 1, "batch_size", "must be >= 1");
    Require(cfg.learning_rate > 0.0, "learning_rate", "must be > 0");
    return [=](OutputDir& out, std::ostream& log) {
      Rng rng(DeriveSeed(seed, 0));
      std::vector<double> p(bins);
      std::vector<double> q(bins);
      for (int k = 0; k < bins; ++k) {
        p[k] = rng.Uniform(0.05, 1.0);
        q[k] = rng.Uniform(0.05, 1.0);
      }
      const double sp = std::accumulate(p.begin(), p.end(), 0.0);
      const double sq = std::accumulate(q.begin(), q.end(), 0.0);
      for (int k = 0; k < bins; ++k) {
        p[k] /= sp;
        q[k] /= sq;
      }
      const auto result = congen::OptimalDiscriminatorCheck(p, q, cfg);
      WriteWith(out, "dopt.csv", [&](std::ostream& s) {
        s << "bin,p,q,closed_form,trained\n";
        for (int k = 0; k < bins; ++k) {
          s << k << "," << FormatDouble(p[k]) << "," << FormatDouble(q[k]) << ","
            << FormatDouble(result.closed_form[k]) << "," << FormatDouble(result.trained[k]) << "\n";
        }
      });
      const json summary = {{"bins", bins}, {"max_deviation", result.max_deviation}};
      out.Write("result.json", summary.dump(2) + "\n");
      log << "max deviation " << result.max_deviation << "\n";
    };
  };
  return c;
}

// Serves until SIGINT or SIGTERM.
Command Serve() {
  Command c;
  c.name = "serve";
  c.help = "Run the annotation service over HTTP";
  c.defaults = [] {
    const service::SessionConfig d;
    return json{{"seed", 0u},
                {"host", "127.0.0.1"},
                {"port", 8080},
                {"dataset", ""},
                {"strategy", pairs::ToString(d.strategy)},
                {"round_size", d.round_size},
                {"candidate_pool", d.candidate_pool},
                {"pending_ttl_ms", d.pending_ttl.count()},
                {"log_dir", "session"},
                {"resume", false},
                {"encoder", EncoderDefaults()},
                {"schedule", ScheduleDefaults()}};
  };
  c.flags = {{"host", "host", FlagKind::kString, "Bind address"},
             {"port", "port", FlagKind::kInt, "Port (0 picks a free one)"},
             {"dataset", "dataset", FlagKind::kString, "Features CSV"},
             {"strategy", "strategy", FlagKind::kString, "Pair strategy: random, easy, hard, hard+pseudo"},
             {"round-size", "round_size", FlagKind::kUint, "Annotations per retrain"},
             {"log-dir", "log_dir", FlagKind::kString, "Session log subdirectory of --out"},
             {"resume", "resume", FlagKind::kBool, "Resume the session logged in log_dir"}};
  c.prepare = [](const json& config) -> Execution {
    service::SessionConfig cfg;
    cfg.seed = Get<std::uint64_t>(config, "seed");
    cfg.strategy = Checked("strategy", [&] { return pairs::ParseStrategyKind(Get<std::string>(config, "strategy")); });
    cfg.round_size = Get<std::size_t>(config, "round_size");
    cfg.candidate_pool = Get<std::size_t>(config, "candidate_pool");
    cfg.pending_ttl = std::chrono::milliseconds(Get<long>(config, "pending_ttl_ms"));
    cfg.encoder = ParseEncoder(config);
    cfg.schedule = ParseSchedule(config);
    Checked("<root>", [&] { cfg.Validate(); });
    const auto host = Get<std::string>(config, "host");
    const int port = Get<int>(config, "port");
    Require(port >= 0 && port <= 65535, "port", "must be in [0, 65535]");
    const auto dataset = RequiredPath(config, "dataset");
    const auto log_dir = RequiredPath(config, "log_dir");
    const bool resume = Get<bool>(config, "resume");
    return [=](OutputDir& out, std::ostream& log) {
      auto features = synth::LoadFeatures(dataset);
      const std::string dir = out.Subdirectory(log_dir);
      std::shared_ptr<service::Session> session;
      if (resume) {
        session = service::Session::Resume(dir, std::move(features));
        log << "resumed session with " << session->log().size() << " comparisons\n";
      } else {
        session = std::make_shared<service::Session>(cfg, std::move(features), dir);
      }
      // Block the stop signals before the server threads start, so they
      // inherit the mask and only sigwait below sees them.
      sigset_t stop_signals;
      sigemptyset(&stop_signals);
      sigaddset(&stop_signals, SIGINT);
      sigaddset(&stop_signals, SIGTERM);
      sigset_t previous;
      pthread_sigmask(SIG_BLOCK, &stop_signals, &previous);
      service::AnnotationServer server;
      server.Attach(session);
      const int bound = server.Start(host, port);
      log << "listening on http://" << host << ":" << bound << std::endl;
      int signal_number = 0;
      sigwait(&stop_signals, &signal_number);
      server.Stop();
      session->WaitIdle();
      pthread_sigmask(SIG_SETMASK, &previous, nullptr);
      log << "stopped after " << session->log().size() << " annotations\n";
    };
  };
  return c;
}

}  // namespace

const std::vector<Command>& Commands() {
  static const std::vector<Command> commands = {
      GenData(),    TrainRaterCommand(),   EvalRater(),   PairsCurve(),       NoiseCurve(), StrategyTableCommand(),
      MarginSweepCommand(), TrainCgen(), EvalCgen(), EditSweepCommand(), DoptCheck(),  Serve()};
  return commands;
}

const Command* FindCommand(const std::string& name) {
  for (const auto& c : Commands()) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

}  // namespace prefrank::runner
