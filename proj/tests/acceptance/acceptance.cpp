// Acceptance suite: one PASS/FAIL line per criterion, with the measured
// quantities next to the verdict. `--only A4,A7` restricts the run. The exit
// status is nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "../support/gradcheck.hpp"
#include "../support/quadrature.hpp"
#include "prefrank/common/random.hpp"
#include "prefrank/congen/congen.hpp"
#include "prefrank/pairs/annotator.hpp"
#include "prefrank/pairs/comparisons_io.hpp"
#include "prefrank/rater/losses.hpp"
#include "prefrank/service/http_server.hpp"
#include "prefrank/service/session.hpp"
#include "prefrank/synth/experiments.hpp"
#include "prefrank/synth/metrics.hpp"

// httplib.h defines macros that collide with Eigen identifiers; it has to come
// after every header that pulls in Eigen.
#include <httplib.h>

namespace prefrank::acceptance {
namespace {

namespace fs = std::filesystem;
using diffcore::Index;
using diffcore::Tensor;
using nlohmann::json;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string title;
  double budget_seconds = 0.0;
  std::function<Outcome()> run;
};

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string List(const std::vector<double>& v, const char* fmt = "%.3f") {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + Format(fmt, v[i]);
  return s + "]";
}

constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

// ---------------------------------------------------------------------------

Outcome GradientCorrectness() {
  std::size_t failed_graphs = 0;
  double worst = 0.0;
  double worst_abs = 0.0;
  std::size_t entries = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    testing::RandomGraphCase c(5000 + s);
    const auto r = testing::CheckGradients([&](diffcore::Graph& g) { return c.Build(g); }, c.Pointers(), 1e-5, 1e-4);
    if (r.failures > 0) ++failed_graphs;
    worst = std::max(worst, r.worst_relative);
    worst_abs = std::max(worst_abs, r.worst_absolute);
    entries += r.checked;
  }
  return {failed_graphs == 0,
          Format("%zu/100 graphs within 1e-4 (%zu entries), worst relative error %.2e, worst absolute difference %.2e",
                 100 - failed_graphs, entries, worst, worst_abs)};
}

rater::EncoderModel RandomEncoder(std::uint64_t seed, int dim) {
  rater::EncoderConfig cfg;
  cfg.input_dim = dim;
  cfg.hidden = {16, 16};
  cfg.seed = seed;
  rater::EncoderModel model(cfg);
  Rng rng(DeriveSeed(seed, 1));
  for (auto& layer : model.network().layers()) {
    for (Index i = 0; i < layer.weight.value.size(); ++i) layer.weight.value.data()[i] = rng.Uniform(-0.8, 0.8);
    for (Index i = 0; i < layer.bias.value.size(); ++i) layer.bias.value.data()[i] = rng.Uniform(-0.3, 0.3);
  }
  return model;
}

Outcome JensenBound() {
  int holds = 0;
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::uint64_t b = 0; b < 100; ++b) {
    Rng rng(DeriveSeed(200, b));
    const int dim = 1 + static_cast<int>(rng.Index(4));
    const auto model = RandomEncoder(DeriveSeed(201, b), dim);
    const Index n = 10;
    Tensor features(n, dim);
    for (Index i = 0; i < features.size(); ++i) features.data()[i] = rng.Normal();
    std::vector<rater::Comparison> batch;
    const std::size_t size = 1 + rng.Index(32);
    const double outcomes[] = {0.0, 0.5, 1.0};
    while (batch.size() < size) {
      const auto a = rng.Index(n);
      const auto c = rng.Index(n);
      if (a != c) batch.push_back(rater::Comparison::Make(a, c, outcomes[rng.Index(3)]));
    }
    const int samples = 2 + static_cast<int>(rng.Index(15));
    const std::uint64_t seed = DeriveSeed(202, b);
    const double mc = rater::RankLossMc(model, features, batch, samples, seed);
    const double ub = rater::RankLossUb(model, features, batch, samples, seed);
    if (ub >= mc) ++holds;
    min_gap = std::min(min_gap, ub - mc);
  }
  return {holds == 100, Format("UB >= MC on %d/100 batches, smallest gap %.3e", holds, min_gap)};
}

Outcome QuadratureEquivalence() {
  constexpr int kDraws = 100000;
  int within = 0;
  double worst_z = 0.0;
  Rng rng(300);
  for (int c = 0; c < 20; ++c) {
    const rater::GaussianRating a{rng.Uniform(-3.0, 3.0), rng.Uniform(0.1, 2.0)};
    const rater::GaussianRating b{rng.Uniform(-3.0, 3.0), rng.Uniform(0.1, 2.0)};
    const auto d = rater::WinProbabilityMc(a, b, kDraws, DeriveSeed(301, c));
    double sq = 0.0;
    for (int m = 0; m < kDraws; ++m) {
      const double s = 1.0 / (1.0 + std::exp(-(d.y_a[m] - d.y_b[m])));
      sq += (s - d.p_a) * (s - d.p_a);
    }
    const double se = std::sqrt(sq / (kDraws - 1)) / std::sqrt(static_cast<double>(kDraws));
    const double exact = testing::WinProbabilityQuadrature(a.mu, a.sigma, b.mu, b.sigma);
    const double z = std::abs(d.p_a - exact) / se;
    if (z <= 3.0) ++within;
    worst_z = std::max(worst_z, z);
  }
  return {within == 20, Format("%d/20 pairs within 3 SE of 32-point Gauss-Hermite, worst %.2f SE", within, worst_z)};
}

Outcome BudgetCurve() {
  synth::BudgetCurveConfig cfg;
  cfg.kind = synth::GeneratorKind::kLinear;
  cfg.sizes = {100, 500, 1000};
  cfg.threshold = 0.9;
  cfg.seed = 400;
  const auto curve = synth::PairsBudgetCurve(cfg);
  bool pass = curve.exponent.has_value() && *curve.exponent <= 1.2;
  std::string detail = "m* =";
  for (std::size_t i = 0; i < cfg.sizes.size(); ++i) {
    const auto& m = curve.minimal_pairs[i];
    pass = pass && m.has_value() && *m <= 5 * cfg.sizes[i];
    detail += m ? Format(" %zu (n=%zu)", *m, cfg.sizes[i]) : Format(" none (n=%zu)", cfg.sizes[i]);
  }
  detail += curve.exponent ? Format(", exponent %.3f (need <= 5n and <= 1.2)", *curve.exponent) : ", no exponent";
  return {pass, detail};
}

Outcome StrategyOrdering() {
  std::vector<double> rand;
  std::vector<double> easy;
  std::vector<double> hard;
  for (auto seed : kSeeds) {
    synth::StrategyTableConfig cfg;
    cfg.n = 500;
    cfg.budget = 2 * cfg.n;
    cfg.strategies = {pairs::StrategyKind::kRandom, pairs::StrategyKind::kEasy, pairs::StrategyKind::kHard};
    cfg.seed = DeriveSeed(500, seed);
    const auto rows = synth::StrategyTable(cfg);
    rand.push_back(rows[0].spearman);
    easy.push_back(rows[1].spearman);
    hard.push_back(rows[2].spearman);
  }
  const double r = Median(rand);
  const double e = Median(easy);
  const double h = Median(hard);
  return {h >= e - 0.02 && r >= e - 0.02,
          Format("median rho hard %.4f, random %.4f, easy %.4f (need hard, random >= easy - 0.02)", h, r, e)};
}

Outcome NoiseResistance() {
  std::vector<double> rating;
  std::vector<double> label;
  for (auto seed : kSeeds) {
    synth::MarginSweepConfig cfg;
    cfg.seed = DeriveSeed(600, seed);
    const auto rows = synth::NoiseResistanceCurve(cfg);
    std::vector<double> r;
    std::vector<double> l;
    for (const auto& p : rows) {
      r.push_back(p.rating_spearman);
      l.push_back(p.label_spearman);
    }
    rating.push_back(synth::Degradation(r));
    label.push_back(synth::Degradation(l));
  }
  const double mr = Median(rating);
  const double ml = Median(label);
  return {mr <= ml, Format("median degradation rating %.4f vs noisy label %.4f; per seed rating %s label %s", mr, ml,
                           List(rating).c_str(), List(label).c_str())};
}

Outcome UncertaintyShape() {
  int holds = 0;
  std::vector<double> middle;
  std::vector<double> extremes;
  for (auto seed : kSeeds) {
    synth::UncertaintyShapeConfig cfg;
    cfg.kind = synth::GeneratorKind::kRadial;
    cfg.seed = DeriveSeed(700, seed);
    const auto shape = synth::UncertaintyByTercile(cfg);
    middle.push_back(shape.middle);
    extremes.push_back(shape.extremes);
    if (shape.middle >= shape.extremes) ++holds;
  }
  return {holds >= 4, Format("middle >= extremes on %d/5 seeds (need 4); middle %s extremes %s", holds,
                             List(middle).c_str(), List(extremes).c_str())};
}

double BruteForceRisk(const std::vector<double>& ratings, const std::vector<double>& omega) {
  const std::size_t n = ratings.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](std::size_t u, std::size_t v) {
    return ratings[u] != ratings[v] ? ratings[u] > ratings[v] : u < v;
  });
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) total += omega[perm[j]] > omega[perm[i]] ? 1 : 0;
  }
  return total;
}

Outcome ExpectedRiskOracle() {
  Rng rng(800);
  int agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.Index(8);
    std::vector<double> omega(n);
    std::vector<double> ratings(n);
    // Half the trials use coarse values so ties occur on both sides.
    const bool coarse = trial % 2 == 0;
    for (auto& o : omega) o = coarse ? static_cast<double>(rng.Index(4)) : rng.Normal();
    for (auto& r : ratings) r = coarse ? static_cast<double>(rng.Index(4)) : rng.Normal();
    const synth::Oracle oracle(synth::GeneratorKind::kLinear, {1.0}, omega);
    if (synth::ExpectedRisk(ratings, oracle).total == BruteForceRisk(ratings, omega)) ++agree;
  }
  return {agree == 1000, Format("%d/1000 instances (n <= 8) equal to exhaustive counting", agree)};
}

// Ring data set, random noiseless pairs, default rater: the shared setup of
// the conditional generation criteria.
struct GanSetup {
  synth::SyntheticDataset data;
  std::vector<rater::Comparison> comparisons;
};

GanSetup RingSetup(std::uint64_t seed) {
  GanSetup s;
  s.data = synth::Generate(synth::GeneratorKind::kRing, 500, 2, DeriveSeed(seed, 1));
  s.comparisons = synth::AnnotateRandomPairs(s.data, {}, 1000, DeriveSeed(seed, 2));
  return s;
}

Outcome ConditionalGeneration() {
  const std::uint64_t seed = 900;
  const auto setup = RingSetup(seed);
  const auto model = synth::TrainRater(setup.data, setup.comparisons, {}, DeriveSeed(seed, 3));
  const congen::FrozenRater rater(model);
  const auto data = congen::BuildGanData(setup.data.features, setup.comparisons, rater, 20, DeriveSeed(seed, 4));
  congen::GanConfig cfg;
  cfg.steps = 2000;
  cfg.seed = DeriveSeed(seed, 5);
  const auto gan = congen::TrainGan(cfg, data, rater);
  congen::EvaluationOptions opts;
  opts.sweep_points = 21;
  opts.seed = DeriveSeed(seed, 6);
  const auto e = congen::EvaluateGan(gan.generator, rater, data, opts);
  return {e.attribute_error <= 0.15 && e.cycle_error <= 0.10 && e.sweep_spearman >= 0.9,
          Format("attribute error %.4f rating-std (<= 0.15), cycle L1 %.4f data-std (<= 0.10), sweep rho %.4f "
                 "(>= 0.9), self-edit %.4f",
                 e.attribute_error, e.cycle_error, e.sweep_spearman, e.self_edit)};
}

// Attribute error of one arm: a rater with `dropout`, then a generator with
// the given corruption under conditioning noise of one rating std.
double RobustnessArm(const GanSetup& setup, std::uint64_t seed, double dropout, congen::CorruptionSource corruption) {
  synth::RaterSetup rs;
  rs.encoder.dropout = dropout;
  const auto model = synth::TrainRater(setup.data, setup.comparisons, rs, DeriveSeed(seed, 3));
  const congen::FrozenRater rater(model);
  const auto data = congen::BuildGanData(setup.data.features, setup.comparisons, rater, 20, DeriveSeed(seed, 4));
  congen::GanConfig cfg;
  cfg.seed = DeriveSeed(seed, 5);
  cfg.corruption = corruption;
  cfg.conditioning_noise = 1.0 * data.rating_std;
  const auto gan = congen::TrainGan(cfg, data, rater);
  congen::EvaluationOptions opts;
  opts.seed = DeriveSeed(seed, 6);
  return congen::EvaluateGan(gan.generator, rater, data, opts).attribute_error;
}

Outcome RobustnessOrdering() {
  std::vector<double> bayesian;
  std::vector<double> deterministic;
  for (auto s : kSeeds) {
    const std::uint64_t seed = DeriveSeed(1000, s);
    const auto setup = RingSetup(seed);
    bayesian.push_back(RobustnessArm(setup, seed, 0.2, congen::CorruptionSource::kTotal));
    deterministic.push_back(RobustnessArm(setup, seed, 0.0, congen::CorruptionSource::kOff));
  }
  const double b = Median(bayesian);
  const double d = Median(deterministic);
  return {b <= d, Format("median attribute error Bayesian+corruption %.4f vs deterministic %.4f; per seed %s vs %s", b, d,
                         List(bayesian, "%.4f").c_str(), List(deterministic, "%.4f").c_str())};
}

Outcome OptimalDiscriminator() {
  Rng rng(1100);
  std::vector<double> p(16);
  std::vector<double> q(16);
  for (int k = 0; k < 16; ++k) {
    p[k] = rng.Uniform(0.05, 1.0);
    q[k] = rng.Uniform(0.05, 1.0);
  }
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  const double sq = std::accumulate(q.begin(), q.end(), 0.0);
  for (int k = 0; k < 16; ++k) {
    p[k] /= sp;
    q[k] /= sq;
  }
  congen::DoptConfig cfg;
  cfg.seed = 1101;
  const auto r = congen::OptimalDiscriminatorCheck(p, q, cfg);
  return {r.max_deviation <= 0.05, Format("max |D - p/(p+q)| over 16 bins %.4f (<= 0.05)", r.max_deviation)};
}

Outcome ServiceLoop() {
  const std::uint64_t seed = 1200;
  const auto data = synth::Generate(synth::GeneratorKind::kLinear, 200, 4, seed);
  const fs::path dir = fs::temp_directory_path() / "prefrank_acceptance_service";
  fs::remove_all(dir);

  service::SessionConfig config;
  config.seed = DeriveSeed(seed, 1);
  auto session = std::make_shared<service::Session>(config, data.features, dir.string());
  service::AnnotationServer server;
  server.Attach(session);
  const int port = server.Start("127.0.0.1", 0);
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(60, 0);

  int accepted = 0;
  for (int i = 0; i < 200; ++i) {
    const auto pair = client.Get("/next-pair");
    if (!pair || pair->status != 200) break;
    const json p = json::parse(pair->body);
    const auto a = p["item_a"]["id"].get<std::size_t>();
    const auto b = p["item_b"]["id"].get<std::size_t>();
    const double outcome =
        pairs::AnnotateWithNoise(data.oracle.Attribute(a), data.oracle.Attribute(b), 0.0, 0.0, 0.0);
    const json body = {{"pair_id", p["pair_id"]}, {"outcome", outcome}};
    const auto res = client.Post("/comparison", body.dump(), "application/json");
    if (res && res->status == 200) ++accepted;
  }
  // Wait for the retrain queued by the last accepted annotation.
  json status;
  for (int tries = 0; tries < 6000; ++tries) {
    const auto res = client.Get("/status");
    status = json::parse(res->body);
    if (status["rounds_completed"].get<std::size_t>() * config.round_size >= static_cast<std::size_t>(accepted) &&
        !status["training"].get<bool>()) {
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  const auto ratings_res = client.Get("/ratings");
  server.Stop();
  session->WaitIdle();
  if (!ratings_res || ratings_res->status != 200) return {false, "no ratings after the annotation loop"};
  const json ratings = json::parse(ratings_res->body);
  std::vector<double> means(data.size());
  for (const auto& r : ratings) means[r["id"].get<std::size_t>()] = r["mean"].get<double>();
  const double rho = synth::Spearman(means, data.oracle.attributes());

  // Offline replay from the session directory alone.
  std::ifstream header_in(dir / "session.json");
  const json header = json::parse(header_in);
  const auto replay_config = service::SessionConfig::FromJson(header.at("config"));
  const auto log = pairs::LoadComparisons((dir / "comparisons.csv").string());
  std::ifstream snap_in(dir / "snapshot.json", std::ios::binary);
  std::stringstream live;
  live << snap_in.rdbuf();
  const json live_json = json::parse(live.str());
  const auto round = live_json.at("round").get<std::size_t>();
  const auto prefix = live_json.at("comparisons").get<std::size_t>();
  const auto replay = service::TrainSnapshot(replay_config, data.features,
                                             std::span<const rater::Comparison>(log).first(prefix), round);
  const bool identical = replay.ToJson().dump() + "\n" == live.str();
  fs::remove_all(dir);
  return {accepted == 200 && rho >= 0.8 && identical,
          Format("%d/200 annotations accepted over HTTP, %zu rounds, post-retrain rho %.4f (>= 0.8), replay of round "
                 "%zu %s",
                 accepted, status["rounds_completed"].get<std::size_t>(), rho, round,
                 identical ? "byte-identical" : "DIFFERS")};
}

std::vector<Criterion> Criteria() {
  return {
      {"A1", "gradient correctness", 30, GradientCorrectness},
      {"A2", "Jensen bound", 10, JensenBound},
      {"A3", "quadrature equivalence", 30, QuadratureEquivalence},
      {"A4", "budget curve", 600, BudgetCurve},
      {"A5", "strategy ordering", 600, StrategyOrdering},
      {"A6", "noise resistance", 600, NoiseResistance},
      {"A7", "uncertainty shape", 300, UncertaintyShape},
      {"A8", "expected-risk oracle", 10, ExpectedRiskOracle},
      {"A9", "conditional generation", 900, ConditionalGeneration},
      {"A10", "robustness ordering", 1800, RobustnessOrdering},
      {"A11", "optimal discriminator", 120, OptimalDiscriminator},
      {"A12", "service loop", 300, ServiceLoop},
  };
}

}  // namespace
}  // namespace prefrank::acceptance

int main(int argc, char** argv) {
  using prefrank::acceptance::Criteria;
  CLI::App app{"Acceptance criteria A1-A12"};
  std::vector<std::string> only;
  app.add_option("--only", only, "Criteria to run, e.g. A1,A7")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const auto criteria = Criteria();
  const std::set<std::string> selected(only.begin(), only.end());
  for (const auto& id : selected) {
    if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.id == id; })) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
  }
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && selected.count(c.id) == 0) continue;
    const auto start = std::chrono::steady_clock::now();
    prefrank::acceptance::Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = outcome.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s %s %s: %s (%.1f s of %.0f s%s)\n", c.id.c_str(), pass ? "PASS" : "FAIL", c.title.c_str(),
                outcome.detail.c_str(), secs, c.budget_seconds, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
