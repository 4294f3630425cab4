#pragma once

// Gauss-Hermite quadrature for expectations under a Gaussian, used as the
// reference value for Monte Carlo win probabilities.

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "prefrank/common/numerics.hpp"

namespace prefrank::testing {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Physicists' Gauss-Hermite rule (weight exp(-t^2)) via the Golub-Welsch
// eigenvalue method on the Jacobi matrix.
inline QuadratureRule GaussHermite(int points) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(points, points);
  for (int i = 1; i < points; ++i) {
    const double off = std::sqrt(static_cast<double>(i) / 2.0);
    jacobi(i, i - 1) = off;
    jacobi(i - 1, i) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  QuadratureRule rule;
  const double mass = std::sqrt(std::numbers::pi);
  for (int i = 0; i < points; ++i) {
    rule.nodes.push_back(solver.eigenvalues()(i));
    const double v = solver.eigenvectors()(0, i);
    rule.weights.push_back(mass * v * v);
  }
  return rule;
}

// E[sigm(y_a - y_b)] with y ~ N(mu, sigma^2) independent: the difference is
// N(mu_a - mu_b, sigma_a^2 + sigma_b^2).
inline double WinProbabilityQuadrature(double mu_a, double sigma_a, double mu_b, double sigma_b,
                                       int points = 32) {
  const QuadratureRule rule = GaussHermite(points);
  const double mean = mu_a - mu_b;
  const double sd = std::sqrt(sigma_a * sigma_a + sigma_b * sigma_b);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    sum += rule.weights[i] * Sigmoid(mean + std::numbers::sqrt2 * sd * rule.nodes[i]);
  }
  return sum / std::sqrt(std::numbers::pi);
}

}  // namespace prefrank::testing
