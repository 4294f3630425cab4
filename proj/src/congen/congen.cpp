#include "prefrank/congen/congen.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "prefrank/common/hash.hpp"
#include "prefrank/common/numerics.hpp"
#include "prefrank/common/random.hpp"
#include "prefrank/pairs/sampling.hpp"
#include "prefrank/rater/losses.hpp"
#include "prefrank/synth/metrics.hpp"

namespace prefrank::congen {

using diffcore::Index;

std::string ToString(CorruptionSource s) {
  switch (s) {
    case CorruptionSource::kTotal: return "total";
    case CorruptionSource::kAleatoric: return "aleatoric";
    case CorruptionSource::kOff: return "off";
  }
  return "unknown";
}

CorruptionSource ParseCorruptionSource(const std::string& s) {
  if (s == "total") return CorruptionSource::kTotal;
  if (s == "aleatoric") return CorruptionSource::kAleatoric;
  if (s == "off") return CorruptionSource::kOff;
  throw std::invalid_argument("corruption: expected total, aleatoric or off, got \"" + s + "\"");
}

// ---------------------------------------------------------------------------
// GanConfig

void GanConfig::Validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument(field + ": " + why);
  };
  if (!(lambda_rec >= 0.0) || !std::isfinite(lambda_rec)) fail("lambda_rec", "must be finite and >= 0");
  if (!(lambda_cyc >= 0.0) || !std::isfinite(lambda_cyc)) fail("lambda_cyc", "must be finite and >= 0");
  if (d_steps < 1) fail("d_steps", "must be >= 1");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (steps < 0) fail("steps", "must be >= 0");
  if (!(lr_generator > 0.0)) fail("lr_generator", "must be > 0");
  if (!(lr_discriminator > 0.0)) fail("lr_discriminator", "must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1", "must be in [0, 1)");
  for (int h : generator_hidden) {
    if (h < 1) fail("generator_hidden", "widths must be >= 1");
  }
  for (int h : discriminator_hidden) {
    if (h < 1) fail("discriminator_hidden", "widths must be >= 1");
  }
  if (!(conditioning_noise >= 0.0) || !std::isfinite(conditioning_noise)) {
    fail("conditioning_noise", "must be finite and >= 0");
  }
}

nlohmann::json GanConfig::ToJson() const {
  return {{"lambda_rec", lambda_rec},
          {"lambda_cyc", lambda_cyc},
          {"d_steps", d_steps},
          {"batch_size", batch_size},
          {"steps", steps},
          {"lr_generator", lr_generator},
          {"lr_discriminator", lr_discriminator},
          {"beta1", beta1},
          {"generator_hidden", generator_hidden},
          {"discriminator_hidden", discriminator_hidden},
          {"corruption", ToString(corruption)},
          {"conditioning_noise", conditioning_noise},
          {"non_saturating", non_saturating},
          {"seed", seed}};
}

GanConfig GanConfig::FromJson(const nlohmann::json& j) {
  GanConfig c;
  c.lambda_rec = j.at("lambda_rec").get<double>();
  c.lambda_cyc = j.at("lambda_cyc").get<double>();
  c.d_steps = j.at("d_steps").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.steps = j.at("steps").get<int>();
  c.lr_generator = j.at("lr_generator").get<double>();
  c.lr_discriminator = j.at("lr_discriminator").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.generator_hidden = j.at("generator_hidden").get<std::vector<int>>();
  c.discriminator_hidden = j.at("discriminator_hidden").get<std::vector<int>>();
  c.corruption = ParseCorruptionSource(j.at("corruption").get<std::string>());
  c.conditioning_noise = j.at("conditioning_noise").get<double>();
  c.non_saturating = j.at("non_saturating").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.Validate();
  return c;
}

// ---------------------------------------------------------------------------
// FrozenRater and data

std::uint64_t Fingerprint(const rater::EncoderModel& model) {
  Fnv1a h;
  h.Update(model.config().ToJson().dump());
  for (const auto& layer : model.network().layers()) {
    h.Update(std::span<const double>(layer.weight.value.data(), static_cast<std::size_t>(layer.weight.value.size())));
    h.Update(std::span<const double>(layer.bias.value.data(), static_cast<std::size_t>(layer.bias.value.size())));
  }
  return h.digest();
}

FrozenRater::FrozenRater(rater::EncoderModel model) : model_(std::move(model)), fingerprint_(Fingerprint(model_)) {}

Var FrozenRater::MeanRating(Graph& g, Var features) const {
  // Frozen forward: weights are constants, so the model is never written.
  return const_cast<rater::EncoderModel&>(model_).Forward(g, features, false, 0, true).mu;
}

std::vector<double> FrozenRater::MeanRatings(const Tensor& features) const {
  return rater::MeanRatings(model_, features);
}

GanData BuildGanData(const Tensor& features, std::span<const rater::Comparison> comparisons,
                     const FrozenRater& rater, int passes, std::uint64_t seed) {
  if (features.cols() != rater.model().config().input_dim) {
    throw diffcore::ShapeError("BuildGanData", diffcore::ShapeOf(features), "feature width differs from the rater");
  }
  rater::RequireKnownItems(comparisons, static_cast<std::size_t>(features.rows()));
  GanData data;
  data.features = features;
  data.pairs = pairs::FilterEqual(comparisons);
  if (data.pairs.empty()) throw std::invalid_argument("BuildGanData: no different-pairs after filtering ties");
  data.ratings = rater.MeanRatings(features);
  const auto estimates = rater::PredictWithUncertainty(rater.model(), features, passes, seed);
  for (const auto& e : estimates) {
    data.sigma_total.push_back(std::sqrt(e.total));
    data.sigma_aleatoric.push_back(std::sqrt(e.aleatoric));
  }
  const double n = static_cast<double>(data.ratings.size());
  data.rating_mean = std::accumulate(data.ratings.begin(), data.ratings.end(), 0.0) / n;
  double var = 0.0;
  for (double r : data.ratings) var += (r - data.rating_mean) * (r - data.rating_mean);
  data.rating_std = var > 0.0 ? std::sqrt(var / n) : 1.0;
  data.rater_fingerprint = rater.fingerprint();
  return data;
}

// ---------------------------------------------------------------------------
// Networks

namespace {

std::vector<int> Widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

Var NormalizedInput(Graph& g, Var x, Var y, double mean, double sd) {
  return g.ConcatCols(x, g.Scale(g.AddScalar(y, -mean), 1.0 / sd));
}

Tensor Column(std::span<const double> v) {
  Tensor t(static_cast<Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) t(static_cast<Index>(i), 0) = v[i];
  return t;
}

void RequireScale(double sd) {
  if (!(sd > 0.0) || !std::isfinite(sd)) throw std::invalid_argument("rating_std: must be finite and > 0");
}

}  // namespace

Generator::Generator(int dim, std::vector<int> hidden, double rating_mean, double rating_std, std::uint64_t seed)
    : dim_(dim),
      rating_mean_(rating_mean),
      rating_std_(rating_std),
      net_(Widths(dim + 1, hidden, dim), 0.0, seed, /*zero_output=*/true) {
  RequireScale(rating_std);
}

Var Generator::Forward(Graph& g, Var x, Var y, bool frozen) {
  Var delta = net_.Forward(g, NormalizedInput(g, x, y, rating_mean_, rating_std_), {.frozen = frozen});
  return g.Add(x, delta);
}

Tensor Generator::Evaluate(const Tensor& x, std::span<const double> y) const {
  if (static_cast<Index>(y.size()) != x.rows()) throw std::invalid_argument("Generator: one rating per row required");
  Graph g;
  Var out = const_cast<Generator*>(this)->Forward(g, g.Constant(x), g.Constant(Column(y)), true);
  return g.value(out);
}

nlohmann::json Generator::ToJson() const {
  return {{"dim", dim_}, {"rating_mean", rating_mean_}, {"rating_std", rating_std_}, {"network", net_.ToJson()}};
}

Generator Generator::FromJson(const nlohmann::json& j) {
  Generator gen;
  gen.dim_ = j.at("dim").get<int>();
  gen.rating_mean_ = j.at("rating_mean").get<double>();
  gen.rating_std_ = j.at("rating_std").get<double>();
  RequireScale(gen.rating_std_);
  gen.net_ = diffcore::Mlp::FromJson(j.at("network"));
  if (gen.net_.input_width() != gen.dim_ + 1 || gen.net_.output_width() != gen.dim_) {
    throw std::invalid_argument("generator: network widths do not match dim");
  }
  return gen;
}

Discriminator::Discriminator(int dim, std::vector<int> hidden, double rating_mean, double rating_std,
                             std::uint64_t seed)
    : dim_(dim), rating_mean_(rating_mean), rating_std_(rating_std), net_(Widths(dim + 1, hidden, 1), 0.0, seed) {
  RequireScale(rating_std);
}

Var Discriminator::Logit(Graph& g, Var x, Var y, bool frozen) {
  return net_.Forward(g, NormalizedInput(g, x, y, rating_mean_, rating_std_), {.frozen = frozen});
}

std::vector<double> Discriminator::Probability(const Tensor& x, std::span<const double> y) const {
  if (static_cast<Index>(y.size()) != x.rows()) {
    throw std::invalid_argument("Discriminator: one rating per row required");
  }
  Graph g;
  Var logit = const_cast<Discriminator*>(this)->Logit(g, g.Constant(x), g.Constant(Column(y)), true);
  std::vector<double> out;
  // Saturated logits round to 0 or 1; keep the probability strictly inside.
  const double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  for (Index i = 0; i < x.rows(); ++i) out.push_back(std::clamp(Sigmoid(g.value(logit)(i, 0)), lo, hi));
  return out;
}

nlohmann::json Discriminator::ToJson() const {
  return {{"dim", dim_}, {"rating_mean", rating_mean_}, {"rating_std", rating_std_}, {"network", net_.ToJson()}};
}

Discriminator Discriminator::FromJson(const nlohmann::json& j) {
  Discriminator d;
  d.dim_ = j.at("dim").get<int>();
  d.rating_mean_ = j.at("rating_mean").get<double>();
  d.rating_std_ = j.at("rating_std").get<double>();
  RequireScale(d.rating_std_);
  d.net_ = diffcore::Mlp::FromJson(j.at("network"));
  if (d.net_.input_width() != d.dim_ + 1 || d.net_.output_width() != 1) {
    throw std::invalid_argument("discriminator: network widths do not match dim");
  }
  return d;
}

// ---------------------------------------------------------------------------
// Batches and losses

std::vector<double> Corrupt(std::span<const double> y, std::span<const double> sigma, std::uint64_t seed) {
  if (y.size() != sigma.size()) throw std::invalid_argument("Corrupt: length mismatch");
  Rng rng(seed);
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(sigma[i] >= 0.0)) throw std::invalid_argument("Corrupt: sigma must be >= 0");
    const double eps = rng.Normal();
    out[i] = sigma[i] == 0.0 ? y[i] : y[i] + sigma[i] * eps;
  }
  return out;
}

GenPairBatch SampleBatch(const GanData& data, const GanConfig& config, std::uint64_t seed) {
  if (data.pairs.empty()) throw std::invalid_argument("SampleBatch: no different-pairs");
  const auto rows = static_cast<Index>(config.batch_size);
  const Index dim = data.features.cols();
  Rng rng(DeriveSeed(seed, 0));
  GenPairBatch b;
  b.x.resize(rows, dim);
  b.x_target.resize(rows, dim);
  b.y_source.resize(rows, 1);
  b.y_target.resize(rows, 1);
  b.sigma.resize(rows, 1);
  b.corruption_sigma.resize(rows, 1);
  std::vector<double> targets(static_cast<std::size_t>(rows));
  std::vector<double> sigmas(static_cast<std::size_t>(rows));
  for (Index k = 0; k < rows; ++k) {
    const auto& pair = data.pairs[rng.Index(data.pairs.size())];
    ItemId s = pair.a;
    ItemId t = pair.b;
    if (rng.Uniform() < 0.5) std::swap(s, t);
    b.source.push_back(s);
    b.target.push_back(t);
    b.x.row(k) = data.features.row(static_cast<Index>(s));
    b.x_target.row(k) = data.features.row(static_cast<Index>(t));
    b.y_source(k, 0) = data.ratings[s];
    b.y_target(k, 0) = data.ratings[t];
    const double base = config.corruption == CorruptionSource::kAleatoric ? data.sigma_aleatoric[t] : data.sigma_total[t];
    double sigma = 0.0;
    if (config.corruption != CorruptionSource::kOff) {
      sigma = std::sqrt(base * base + config.conditioning_noise * config.conditioning_noise);
    }
    b.sigma(k, 0) = base;
    b.corruption_sigma(k, 0) = sigma;
    targets[static_cast<std::size_t>(k)] = data.ratings[t];
    sigmas[static_cast<std::size_t>(k)] = sigma;
  }
  b.y_real = b.y_target;
  if (config.conditioning_noise > 0.0) {
    Rng noise(DeriveSeed(seed, 1));
    for (Index k = 0; k < rows; ++k) b.y_real(k, 0) += config.conditioning_noise * noise.Normal();
  }
  b.y_corrupt = Column(Corrupt(targets, sigmas, DeriveSeed(seed, 2)));
  return b;
}

AdversarialVars AdversarialLosses(Graph& g, Generator& gen, Discriminator& disc, const GenPairBatch& batch,
                                  bool non_saturating, bool frozen_g, bool frozen_d) {
  if (batch.x.rows() == 0) throw std::invalid_argument("AdversarialLosses: empty batch");
  Var fake = gen.Forward(g, g.Constant(batch.x), g.Constant(batch.y_target), frozen_g);
  Var real_logit = disc.Logit(g, g.Constant(batch.x_target), g.Constant(batch.y_real), frozen_d);
  Var fake_logit = disc.Logit(g, fake, g.Constant(batch.y_corrupt), frozen_d);
  // log D = -softplus(-logit), log(1 - D) = -softplus(logit).
  Var real_term = g.Mean(g.Softplus(g.Scale(real_logit, -1.0)));
  Var fake_term = g.Mean(g.Softplus(fake_logit));
  AdversarialVars out;
  out.loss_d = g.Add(real_term, fake_term);
  out.loss_g = non_saturating ? g.Mean(g.Softplus(g.Scale(fake_logit, -1.0))) : g.Scale(fake_term, -1.0);
  return out;
}

Var RecLossY(Graph& g, const FrozenRater& rater, Generator& gen, const GenPairBatch& batch, bool frozen_g) {
  if (batch.x.rows() == 0) throw std::invalid_argument("RecLossY: empty batch");
  Var fake = gen.Forward(g, g.Constant(batch.x), g.Constant(batch.y_target), frozen_g);
  Var err = g.Sub(rater.MeanRating(g, fake), g.Constant(batch.y_target));
  const Tensor s = batch.sigma.cwiseMax(kRecSigmaFloor);
  const Tensor inv = (2.0 * s.array().square()).inverse().matrix();
  const Tensor log_term = (0.5 * s.array().square().log()).matrix();
  return g.Mean(g.Add(g.Mul(g.Square(err), g.Constant(inv)), g.Constant(log_term)));
}

double RecLossFromErrors(std::span<const double> errors, std::span<const double> sigma) {
  if (errors.size() != sigma.size() || errors.empty()) throw std::invalid_argument("RecLossFromErrors: bad lengths");
  double sum = 0.0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double s = std::max(sigma[i], kRecSigmaFloor);
    sum += errors[i] * errors[i] / (2.0 * s * s) + 0.5 * std::log(s * s);
  }
  return sum / static_cast<double>(errors.size());
}

Var CycleLoss(Graph& g, Generator& gen, const GenPairBatch& batch, bool frozen_g) {
  if (batch.x.rows() == 0) throw std::invalid_argument("CycleLoss: empty batch");
  Var x = g.Constant(batch.x);
  Var edited = gen.Forward(g, x, g.Constant(batch.y_target), frozen_g);
  Var back = gen.Forward(g, edited, g.Constant(batch.y_source), frozen_g);
  return g.Scale(g.Sum(g.Abs(g.Sub(back, x))), 1.0 / static_cast<double>(batch.x.rows()));
}

// ---------------------------------------------------------------------------
// Training

nlohmann::json GanModel::ToJson() const {
  return {{"config", config.ToJson()},
          {"generator", generator.ToJson()},
          {"discriminator", discriminator.ToJson()}};
}

GanModel GanModel::FromJson(const nlohmann::json& j) {
  GanModel m;
  m.config = GanConfig::FromJson(j.at("config"));
  m.generator = Generator::FromJson(j.at("generator"));
  m.discriminator = Discriminator::FromJson(j.at("discriminator"));
  return m;
}

GanModel TrainGan(const GanConfig& config, const GanData& data, const FrozenRater& rater) {
  config.Validate();
  if (rater.fingerprint() != data.rater_fingerprint) {
    throw std::invalid_argument("TrainGan: rater differs from the snapshot the conditioning data was built from");
  }
  const int dim = static_cast<int>(data.features.cols());
  GanModel m;
  m.config = config;
  m.generator = Generator(dim, config.generator_hidden, data.rating_mean, data.rating_std, DeriveSeed(config.seed, kGeneratorStream));
  m.discriminator =
      Discriminator(dim, config.discriminator_hidden, data.rating_mean, data.rating_std, DeriveSeed(config.seed, kDiscriminatorStream));
  diffcore::Adam opt_g({.learning_rate = config.lr_generator, .beta1 = config.beta1});
  diffcore::Adam opt_d({.learning_rate = config.lr_discriminator, .beta1 = config.beta1});
  auto g_params = m.generator.Parameters();
  auto d_params = m.discriminator.Parameters();
  const std::uint64_t stream = DeriveSeed(config.seed, kBatchStream);

  for (int step = 0; step < config.steps; ++step) {
    const auto s = static_cast<std::uint64_t>(step);
    double loss_d = 0.0;
    for (int k = 0; k < config.d_steps; ++k) {
      const auto batch = SampleBatch(data, config, DeriveSeed(stream, s, static_cast<std::uint64_t>(k)));
      m.discriminator.network().ZeroGrad();
      Graph g;
      auto adv = AdversarialLosses(g, m.generator, m.discriminator, batch, config.non_saturating, true, false);
      loss_d = g.scalar(adv.loss_d);
      g.Backward(adv.loss_d);
      opt_d.Step(d_params);
    }
    m.trace.loss_d.push_back(loss_d);

    const auto batch = SampleBatch(data, config, DeriveSeed(stream, s, static_cast<std::uint64_t>(config.d_steps)));
    m.generator.network().ZeroGrad();
    Graph g;
    auto adv = AdversarialLosses(g, m.generator, m.discriminator, batch, config.non_saturating, false, true);
    Var total = adv.loss_g;
    double rec = 0.0;
    double cyc = 0.0;
    if (config.lambda_rec > 0.0) {
      Var r = RecLossY(g, rater, m.generator, batch);
      rec = g.scalar(r);
      total = g.Add(total, g.Scale(r, config.lambda_rec));
    }
    if (config.lambda_cyc > 0.0) {
      Var c = CycleLoss(g, m.generator, batch);
      cyc = g.scalar(c);
      total = g.Add(total, g.Scale(c, config.lambda_cyc));
    }
    m.trace.loss_g_adv.push_back(g.scalar(adv.loss_g));
    m.trace.loss_rec.push_back(rec);
    m.trace.loss_cyc.push_back(cyc);
    g.Backward(total);
    opt_g.Step(g_params);
  }
  return m;
}

Tensor Edit(const Generator& gen, const Tensor& x, std::span<const double> y_target) {
  return gen.Evaluate(x, y_target);
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double Median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("Median: empty");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double Percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double DataStd(const Tensor& features) {
  double total = 0.0;
  for (Index j = 0; j < features.cols(); ++j) {
    const double mean = features.col(j).mean();
    total += std::sqrt((features.col(j).array() - mean).square().mean());
  }
  const double sd = total / static_cast<double>(features.cols());
  return sd > 0.0 ? sd : 1.0;
}

Tensor RowsOf(const Tensor& features, std::span<const ItemId> ids) {
  Tensor out(static_cast<Index>(ids.size()), features.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Index>(i)) = features.row(static_cast<Index>(ids[i]));
  return out;
}

}  // namespace

std::vector<double> SweepTargets(const GanData& data, int points) {
  if (points < 2) throw std::invalid_argument("sweep points: must be >= 2");
  const double lo = Percentile(data.ratings, 0.05);
  const double hi = Percentile(data.ratings, 0.95);
  std::vector<double> out;
  for (int i = 0; i < points; ++i) out.push_back(lo + (hi - lo) * i / (points - 1));
  return out;
}

std::vector<EditSweepRow> EditSweep(const Generator& gen, const FrozenRater& rater, const GanData& data,
                                    std::span<const ItemId> items, int points) {
  const auto targets = SweepTargets(data, points);
  std::vector<EditSweepRow> rows;
  for (ItemId id : items) {
    if (id >= static_cast<std::size_t>(data.features.rows())) {
      throw rater::UnknownItemError(id, static_cast<std::size_t>(data.features.rows()));
    }
    Tensor x(points, data.features.cols());
    for (int i = 0; i < points; ++i) x.row(i) = data.features.row(static_cast<Index>(id));
    const Tensor out = Edit(gen, x, targets);
    const auto realized = rater.MeanRatings(out);
    for (int i = 0; i < points; ++i) {
      EditSweepRow row;
      row.id = id;
      row.y_target = targets[static_cast<std::size_t>(i)];
      for (Index j = 0; j < out.cols(); ++j) row.output.push_back(out(i, j));
      row.realized = realized[static_cast<std::size_t>(i)];
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void WriteEditSweepCsv(std::ostream& out, std::span<const EditSweepRow> rows) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().output.size();
  out << "id,y_target";
  for (std::size_t j = 0; j < dim; ++j) out << ",out_" << j;
  out << ",realized\n" << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.id << ',' << r.y_target;
    for (double v : r.output) out << ',' << v;
    out << ',' << r.realized << '\n';
  }
}

GanEvaluation EvaluateGan(const Generator& gen, const FrozenRater& rater, const GanData& data,
                          const EvaluationOptions& options) {
  GanConfig sampling;
  sampling.batch_size = static_cast<int>(options.pairs);
  sampling.corruption = CorruptionSource::kOff;
  const auto batch = SampleBatch(data, sampling, DeriveSeed(options.seed, 0));
  const double data_sd = DataStd(data.features);
  GanEvaluation ev;

  std::vector<double> y_target(batch.y_target.data(), batch.y_target.data() + batch.y_target.size());
  std::vector<double> y_source(batch.y_source.data(), batch.y_source.data() + batch.y_source.size());
  const Tensor edited = Edit(gen, batch.x, y_target);
  const auto realized = rater.MeanRatings(edited);
  const Tensor back = Edit(gen, edited, y_source);
  std::vector<double> attr;
  std::vector<double> cyc;
  for (std::size_t k = 0; k < y_target.size(); ++k) {
    attr.push_back(std::abs(realized[k] - y_target[k]) / data.rating_std);
    cyc.push_back((back.row(static_cast<Index>(k)) - batch.x.row(static_cast<Index>(k))).cwiseAbs().sum() / data_sd);
  }
  ev.attribute_error = Median(attr);
  ev.cycle_error = Median(cyc);

  const auto n = static_cast<std::size_t>(data.features.rows());
  std::vector<ItemId> items(n);
  std::iota(items.begin(), items.end(), 0);
  Rng rng(DeriveSeed(options.seed, 1));
  std::shuffle(items.begin(), items.end(), rng.engine());
  items.resize(std::min(n, options.sweep_items));

  const Tensor x = RowsOf(data.features, items);
  std::vector<double> own(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) own[i] = data.ratings[items[i]];
  const Tensor self = Edit(gen, x, own);
  std::vector<double> self_dist;
  for (Index i = 0; i < x.rows(); ++i) self_dist.push_back((self.row(i) - x.row(i)).norm() / data_sd);
  ev.self_edit = Median(self_dist);

  const auto sweep = EditSweep(gen, rater, data, items, options.sweep_points);
  const auto targets = SweepTargets(data, options.sweep_points);
  std::vector<double> rhos;
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::vector<double> realized_sweep;
    for (int p = 0; p < options.sweep_points; ++p) {
      realized_sweep.push_back(sweep[i * static_cast<std::size_t>(options.sweep_points) + static_cast<std::size_t>(p)].realized);
    }
    rhos.push_back(synth::Spearman(targets, realized_sweep));
  }
  ev.sweep_spearman = Median(rhos);
  return ev;
}

// ---------------------------------------------------------------------------
// Optimal discriminator check

DoptResult OptimalDiscriminatorCheck(std::span<const double> p, std::span<const double> q, const DoptConfig& config) {
  if (p.size() != q.size() || p.empty()) throw std::invalid_argument("dopt: p and q must have the same nonzero size");
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!(p[k] >= 0.0 && q[k] >= 0.0)) throw std::invalid_argument("dopt: probabilities must be >= 0");
    if (!(p[k] + q[k] > 0.0)) throw std::invalid_argument("dopt: bin " + std::to_string(k) + " has p + q = 0");
  }
  if (config.steps < 1 || config.batch_size < 1) throw std::invalid_argument("dopt: steps and batch_size must be >= 1");
  const auto bins = static_cast<Index>(p.size());
  diffcore::Mlp disc({static_cast<int>(bins), 1}, 0.0, DeriveSeed(config.seed, 0), /*zero_output=*/true);
  diffcore::Adam opt({.learning_rate = config.learning_rate});
  auto params = disc.Parameters();
  Rng rng(DeriveSeed(config.seed, 1));
  std::discrete_distribution<std::size_t> real_dist(p.begin(), p.end());
  std::discrete_distribution<std::size_t> fake_dist(q.begin(), q.end());
  Tensor real(config.batch_size, bins);
  Tensor fake(config.batch_size, bins);
  for (int step = 0; step < config.steps; ++step) {
    // Linear decay to zero averages out minibatch noise near the optimum.
    opt.set_learning_rate(config.learning_rate * (1.0 - static_cast<double>(step) / config.steps));
    real.setZero();
    fake.setZero();
    for (Index i = 0; i < config.batch_size; ++i) {
      real(i, static_cast<Index>(real_dist(rng.engine()))) = 1.0;
      fake(i, static_cast<Index>(fake_dist(rng.engine()))) = 1.0;
    }
    disc.ZeroGrad();
    Graph g;
    Var real_logit = disc.Forward(g, real, {});
    Var fake_logit = disc.Forward(g, fake, {});
    Var loss = g.Add(g.Mean(g.Softplus(g.Scale(real_logit, -1.0))), g.Mean(g.Softplus(fake_logit)));
    g.Backward(loss);
    opt.Step(params);
  }
  DoptResult result;
  const Tensor logits = disc.Evaluate(Tensor::Identity(bins, bins));
  for (Index k = 0; k < bins; ++k) {
    const double d = Sigmoid(logits(k, 0));
    const double star = p[static_cast<std::size_t>(k)] / (p[static_cast<std::size_t>(k)] + q[static_cast<std::size_t>(k)]);
    result.trained.push_back(d);
    result.closed_form.push_back(star);
    result.max_deviation = std::max(result.max_deviation, std::abs(d - star));
  }
  return result;
}

}  // namespace prefrank::congen
