#include "prefrank/pairs/annotator.hpp"

#include <cmath>
#include <stdexcept>

namespace prefrank::pairs {

void AnnotatorModel::Validate() const {
  if (!(tie_margin >= 0.0) || !std::isfinite(tie_margin)) {
    throw std::invalid_argument("tie_margin: must be finite and >= 0");
  }
  if (!(noise_half_width >= 0.0) || !std::isfinite(noise_half_width)) {
    throw std::invalid_argument("noise_half_width: must be finite and >= 0");
  }
}

double AnnotateWithNoise(double omega_a, double omega_b, double noise_a, double noise_b,
                         double tie_margin) {
  const double a = omega_a + noise_a;
  const double b = omega_b + noise_b;
  if (std::abs(a - b) <= tie_margin) return 0.5;
  return a > b ? 1.0 : 0.0;
}

Annotator::Annotator(AnnotatorModel model) : model_(model), rng_(model.seed) { model_.Validate(); }

double Annotator::Annotate(double omega_a, double omega_b) {
  ++queries_;
  const double w = model_.noise_half_width;
  double noise_a = 0.0;
  double noise_b = 0.0;
  if (w > 0.0) {
    noise_a = rng_.Uniform(-w, w);
    noise_b = rng_.Uniform(-w, w);
  }
  return AnnotateWithNoise(omega_a, omega_b, noise_a, noise_b, model_.tie_margin);
}

}  // namespace prefrank::pairs
