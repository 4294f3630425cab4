#pragma once

#include <cstdint>
#include <functional>

#include "prefrank/common/random.hpp"
#include "prefrank/rater/types.hpp"

namespace prefrank::pairs {

using rater::Comparison;
using rater::ItemId;

struct AnnotatorModel {
  // Attribute gap within which the annotator reports a tie.
  double tie_margin = 0.0;
  // Each attribute is perturbed by Uniform(-w, w) before comparing.
  double noise_half_width = 0.0;
  std::uint64_t seed = 0;

  void Validate() const;
};

// Outcome for fixed perturbations: 0.5 if |(a + noise_a) - (b + noise_b)| <=
// tie_margin, else 1 when A is larger, else 0.
double AnnotateWithNoise(double omega_a, double omega_b, double noise_a, double noise_b,
                         double tie_margin);

// Stateful annotator: draws fresh perturbations per query and counts queries.
class Annotator {
 public:
  explicit Annotator(AnnotatorModel model);

  double Annotate(double omega_a, double omega_b);

  long queries() const { return queries_; }
  const AnnotatorModel& model() const { return model_; }

 private:
  AnnotatorModel model_;
  Rng rng_;
  long queries_ = 0;
};

// The annotation boundary used by collection loops: returns S_A for a pair of
// item ids. Hidden attributes stay behind this callback.
using PairOracle = std::function<double(ItemId a, ItemId b)>;

}  // namespace prefrank::pairs
