#pragma once

#include <span>
#include <vector>

#include "prefrank/rater/encoder.hpp"

namespace prefrank::rater {

struct TrainOptions {
  int epochs = 100;
  int batch_size = 64;
};

struct TrainReport {
  // Mean minibatch loss per epoch.
  std::vector<double> epoch_loss;
  long steps = 0;
};

// Minimizes the configured ranking loss plus decoupled weight decay (the
// dropout-variational bound) with Adam. Dropout is active on every training
// pass. Shuffling, masks and draws derive from the model config seed, so two
// runs from the same initial model are bit-identical.
//
// Throws UnknownItemError before any update if a comparison names a row
// outside `features`.
TrainReport Train(EncoderModel& model, const Tensor& features, std::span<const Comparison> comparisons,
                  const TrainOptions& options);

// Epoch count that gives roughly `target_steps` optimizer steps for a data
// set of `comparison_count` pairs, clamped to [min_epochs, max_epochs].
int EpochsForSteps(std::size_t comparison_count, int batch_size, long target_steps, int min_epochs,
                   int max_epochs);

// Step-budgeted training: the epoch count adapts to the data size so small
// and large comparison sets get a comparable number of optimizer steps.
struct TrainSchedule {
  long target_steps = 1500;
  int batch_size = 64;
  int min_epochs = 5;
  int max_epochs = 500;

  TrainOptions For(std::size_t comparison_count) const {
    return {EpochsForSteps(comparison_count, batch_size, target_steps, min_epochs, max_epochs), batch_size};
  }
};

}  // namespace prefrank::rater
