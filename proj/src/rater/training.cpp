#include "prefrank/rater/training.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "prefrank/common/random.hpp"
#include "prefrank/diffcore/optimizer.hpp"
#include "prefrank/rater/losses.hpp"

namespace prefrank::rater {

TrainReport Train(EncoderModel& model, const Tensor& features, std::span<const Comparison> comparisons,
                  const TrainOptions& options) {
  if (options.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (options.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (features.cols() != model.config().input_dim) {
    throw diffcore::ShapeError("Train", diffcore::ShapeOf(features),
                               "expected " + std::to_string(model.config().input_dim) + " feature columns");
  }
  RequireKnownItems(comparisons, static_cast<std::size_t>(features.rows()));

  TrainReport report;
  if (options.epochs == 0 || comparisons.empty()) return report;

  const auto& cfg = model.config();
  diffcore::Adam optimizer({.learning_rate = cfg.learning_rate, .weight_decay = cfg.weight_decay});
  auto params = model.network().Parameters();

  std::vector<std::size_t> order(comparisons.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Comparison> batch;
  const std::uint64_t train_seed = DeriveSeed(cfg.seed, 0x7a);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    Rng shuffle_rng(DeriveSeed(train_seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    double loss_sum = 0.0;
    long batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(comparisons[order[i]]);

      model.network().ZeroGrad();
      diffcore::Graph g;
      auto loss = BuildRankLoss(g, model, features, batch, cfg.loss, cfg.mc_samples,
                                DeriveSeed(train_seed, static_cast<std::uint64_t>(epoch),
                                           static_cast<std::uint64_t>(batches) + 1));
      loss_sum += g.scalar(loss);
      g.Backward(loss);
      optimizer.Step(params);
      ++batches;
      ++report.steps;
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  return report;
}

int EpochsForSteps(std::size_t comparison_count, int batch_size, long target_steps, int min_epochs,
                   int max_epochs) {
  if (comparison_count == 0) return 0;
  const long per_epoch = static_cast<long>((comparison_count + static_cast<std::size_t>(batch_size) - 1) /
                                           static_cast<std::size_t>(batch_size));
  const long epochs = (target_steps + per_epoch - 1) / per_epoch;
  return static_cast<int>(std::clamp<long>(epochs, min_epochs, max_epochs));
}

}  // namespace prefrank::rater
