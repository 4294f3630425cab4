#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefrank/diffcore/mlp.hpp"
#include "prefrank/diffcore/optimizer.hpp"
#include "prefrank/rater/encoder.hpp"

namespace prefrank::congen {

using diffcore::Graph;
using diffcore::Tensor;
using diffcore::Var;
using rater::ItemId;

// Floor on the corruption standard deviation inside the rating
// reconstruction loss.
inline constexpr double kRecSigmaFloor = 1e-3;

enum class CorruptionSource { kTotal, kAleatoric, kOff };
std::string ToString(CorruptionSource s);
CorruptionSource ParseCorruptionSource(const std::string& s);

struct GanConfig {
  double lambda_rec = 1.0;
  double lambda_cyc = 10.0;
  int d_steps = 1;
  int batch_size = 64;
  int steps = 2000;
  double lr_generator = 1e-3;
  double lr_discriminator = 1e-3;
  double beta1 = 0.5;
  std::vector<int> generator_hidden{64, 64};
  std::vector<int> discriminator_hidden{64, 64};
  CorruptionSource corruption = CorruptionSource::kTotal;
  // Standard deviation of Gaussian noise added to the ratings the
  // discriminator sees on real items. When corruption is on, its variance is
  // added to the corruption variance so both branches carry matching noise.
  double conditioning_noise = 0.0;
  // Generator minimizes -log D(fake) instead of log(1 - D(fake)).
  bool non_saturating = true;
  std::uint64_t seed = 0;

  void Validate() const;
  nlohmann::json ToJson() const;
  static GanConfig FromJson(const nlohmann::json& j);
};

// A rater snapshot that GAN code can only read. Mean ratings are the
// deterministic (dropout off) pass; weights enter graphs as constants.
class FrozenRater {
 public:
  explicit FrozenRater(rater::EncoderModel model);

  Var MeanRating(Graph& g, Var features) const;
  std::vector<double> MeanRatings(const Tensor& features) const;
  const rater::EncoderModel& model() const { return model_; }
  // Digest of the weights, used to detect a rater that changed after the
  // conditioning data was derived from it.
  std::uint64_t fingerprint() const { return fingerprint_; }

 private:
  rater::EncoderModel model_;
  std::uint64_t fingerprint_ = 0;
};

std::uint64_t Fingerprint(const rater::EncoderModel& model);

// Everything the GAN needs from the rating stage, fixed once.
struct GanData {
  Tensor features;                  // n x 2
  std::vector<double> ratings;      // deterministic mean rating per item
  std::vector<double> sigma_total;  // sqrt of predictive total variance
  std::vector<double> sigma_aleatoric;
  // Different-pairs only; every batch row is drawn from one of them.
  std::vector<rater::Comparison> pairs;
  double rating_mean = 0.0;
  double rating_std = 1.0;
  std::uint64_t rater_fingerprint = 0;
};

// Filters equal pairs and runs `passes` stochastic rater passes for the
// corruption scale. Throws std::invalid_argument when no different-pair
// remains.
GanData BuildGanData(const Tensor& features, std::span<const rater::Comparison> comparisons,
                     const FrozenRater& rater, int passes, std::uint64_t seed);

// Conditional generator: x~' = x + f(x, (y' - m) / s). The residual network
// starts at zero, so an untrained generator is the identity.
class Generator {
 public:
  Generator() = default;
  Generator(int dim, std::vector<int> hidden, double rating_mean, double rating_std, std::uint64_t seed);

  Var Forward(Graph& g, Var x, Var y, bool frozen = false);
  Tensor Evaluate(const Tensor& x, std::span<const double> y) const;
  std::vector<diffcore::Parameter*> Parameters() { return net_.Parameters(); }
  diffcore::Mlp& network() { return net_; }
  const diffcore::Mlp& network() const { return net_; }
  int dim() const { return dim_; }

  nlohmann::json ToJson() const;
  static Generator FromJson(const nlohmann::json& j);

 private:
  int dim_ = 2;
  double rating_mean_ = 0.0;
  double rating_std_ = 1.0;
  diffcore::Mlp net_;
};

// Conditional discriminator producing a logit; D = sigm(logit).
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(int dim, std::vector<int> hidden, double rating_mean, double rating_std, std::uint64_t seed);

  Var Logit(Graph& g, Var x, Var y, bool frozen = false);
  std::vector<double> Probability(const Tensor& x, std::span<const double> y) const;
  std::vector<diffcore::Parameter*> Parameters() { return net_.Parameters(); }
  diffcore::Mlp& network() { return net_; }

  nlohmann::json ToJson() const;
  static Discriminator FromJson(const nlohmann::json& j);

 private:
  int dim_ = 2;
  double rating_mean_ = 0.0;
  double rating_std_ = 1.0;
  diffcore::Mlp net_;
};

// One minibatch of (source x, target x', y', sigma') records.
struct GenPairBatch {
  std::vector<ItemId> source;
  std::vector<ItemId> target;
  Tensor x;         // B x dim, sources
  Tensor x_target;  // B x dim, targets (real items for the discriminator)
  Tensor y_source;  // B x 1, rating of each source (cycle back-target)
  Tensor y_target;  // B x 1, y'
  Tensor sigma;     // B x 1, predictive std sigma' of each target
  // B x 1, std of the corruption applied to y': sqrt(sigma'^2 + s^2) with s
  // the conditioning noise, or 0 when corruption is off.
  Tensor corruption_sigma;
  Tensor y_real;    // B x 1, label shown with the real target item
  Tensor y_corrupt; // B x 1, corrupted y' shown with the generated item
};

// Draws one batch: each row picks a different-pair uniformly and orients it
// at random. Corruption and conditioning noise are drawn here. sigma' is the
// total predictive std, or the aleatoric part when that source is selected;
// it scales the reconstruction loss even when corruption is off.
GenPairBatch SampleBatch(const GanData& data, const GanConfig& config, std::uint64_t seed);

// y~' = y' + sigma' * eps with one standard normal draw per entry; sigma' = 0
// returns y' exactly.
std::vector<double> Corrupt(std::span<const double> y, std::span<const double> sigma, std::uint64_t seed);

struct AdversarialVars {
  Var loss_d;
  Var loss_g;
};

// loss_d = -mean log D(x', y_real) - mean log(1 - D(G(x, y'), y~'))
// loss_g = -mean log D(G(x, y'), y~')       (non-saturating), or
//           mean log(1 - D(G(x, y'), y~'))  (literal minimax form).
// `frozen_g` / `frozen_d` choose which network's weights act as constants.
AdversarialVars AdversarialLosses(Graph& g, Generator& gen, Discriminator& disc, const GenPairBatch& batch,
                                  bool non_saturating, bool frozen_g, bool frozen_d);

// mean_k [ (E_mu(G(x_k, y'_k)) - y'_k)^2 / (2 s_k^2) + log(s_k^2) / 2 ],
// s_k = max(sigma'_k, kRecSigmaFloor).
Var RecLossY(Graph& g, const FrozenRater& rater, Generator& gen, const GenPairBatch& batch, bool frozen_g = false);
// Closed form of the same quantity from stored errors and scales.
double RecLossFromErrors(std::span<const double> errors, std::span<const double> sigma);

// mean_k || G(G(x_k, y'_k), y_k) - x_k ||_1
Var CycleLoss(Graph& g, Generator& gen, const GenPairBatch& batch, bool frozen_g = false);

struct GanTrace {
  std::vector<double> loss_d;
  std::vector<double> loss_g_adv;
  std::vector<double> loss_rec;
  std::vector<double> loss_cyc;
};

struct GanModel {
  Generator generator;
  Discriminator discriminator;
  GanConfig config;
  GanTrace trace;

  nlohmann::json ToJson() const;
  static GanModel FromJson(const nlohmann::json& j);
};

// Alternating optimization: `d_steps` discriminator updates, then one
// generator update on adversarial + lambda_rec * rec + lambda_cyc * cycle.
// Seeds: the generator is built with DeriveSeed(seed, kGeneratorStream), the
// discriminator with DeriveSeed(seed, kDiscriminatorStream), and batch k of
// step t (k == d_steps for the generator update) is sampled with
// DeriveSeed(DeriveSeed(seed, kBatchStream), t, k). Trace entries for a
// disabled loss term are 0.
// Throws std::invalid_argument if `rater` is not the snapshot `data` was
// built from.
inline constexpr std::uint64_t kGeneratorStream = 0x6e;
inline constexpr std::uint64_t kDiscriminatorStream = 0xd1;
inline constexpr std::uint64_t kBatchStream = 0xba;

GanModel TrainGan(const GanConfig& config, const GanData& data, const FrozenRater& rater);

Tensor Edit(const Generator& gen, const Tensor& x, std::span<const double> y_target);

struct GanEvaluation {
  // Median |E_mu(G(x, y')) - y'| over sampled pairs, in rating-std units.
  double attribute_error = 0.0;
  // Median || G(G(x, y'), y) - x ||_1 over the same pairs, in data-std units.
  double cycle_error = 0.0;
  // Median || G(x, E_mu(x)) - x ||_2, in data-std units.
  double self_edit = 0.0;
  // Median over items of Spearman(y_target, E_mu(edit(x, y_target))) along
  // an evenly spaced sweep.
  double sweep_spearman = 0.0;
};

struct EvaluationOptions {
  std::size_t pairs = 500;
  std::size_t sweep_items = 50;
  int sweep_points = 21;
  std::uint64_t seed = 0;
};

GanEvaluation EvaluateGan(const Generator& gen, const FrozenRater& rater, const GanData& data,
                          const EvaluationOptions& options);

// Rating sweep used by the evaluation and by edit-sweep exports: evenly
// spaced targets between the 5th and 95th rating percentiles.
std::vector<double> SweepTargets(const GanData& data, int points);

struct EditSweepRow {
  ItemId id = 0;
  double y_target = 0.0;
  std::vector<double> output;
  double realized = 0.0;
};

std::vector<EditSweepRow> EditSweep(const Generator& gen, const FrozenRater& rater, const GanData& data,
                                    std::span<const ItemId> items, int points);
void WriteEditSweepCsv(std::ostream& out, std::span<const EditSweepRow> rows);

// ---------------------------------------------------------------------------
// Optimal discriminator on a discrete toy problem.

struct DoptConfig {
  int steps = 3000;
  int batch_size = 512;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

struct DoptResult {
  std::vector<double> trained;      // D at each bin
  std::vector<double> closed_form;  // p / (p + q)
  double max_deviation = 0.0;
};

// Real samples come from p and fake samples from a frozen toy generator with
// distribution q over the same bins; D sees the one-hot bin and is trained
// with the discriminator loss until convergence.
DoptResult OptimalDiscriminatorCheck(std::span<const double> p, std::span<const double> q,
                                     const DoptConfig& config);

}  // namespace prefrank::congen
