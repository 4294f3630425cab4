#pragma once

#include <cmath>

namespace prefrank {

// Logistic function. Negative arguments are evaluated as 1 - sigm(-z) so that
// Sigmoid(z) + Sigmoid(-z) == 1 holds exactly in floating point.
inline double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  return 1.0 - 1.0 / (1.0 + std::exp(z));
}

// log(1 + exp(z)) without overflow.
inline double Softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

}  // namespace prefrank
