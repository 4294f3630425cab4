#include "prefrank/diffcore/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace prefrank::diffcore {

Adam::Adam(AdamConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw std::invalid_argument("Adam: learning rate must be > 0");
  if (!(config_.weight_decay >= 0.0)) throw std::invalid_argument("Adam: weight decay must be >= 0");
}

void Adam::Step(std::span<Parameter* const> params) {
  if (first_moment_.empty()) {
    for (const Parameter* p : params) {
      first_moment_.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
      second_moment_.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (params.size() != first_moment_.size()) {
    throw std::invalid_argument("Adam::Step: parameter list changed between steps");
  }
  ++step_count_;
  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
  const double lr = config_.learning_rate;
  const double decay = 1.0 - lr * config_.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (ShapeOf(p.grad) != ShapeOf(p.value)) throw ShapeError("Adam::Step", ShapeOf(p.value), ShapeOf(p.grad));
    if (ShapeOf(first_moment_[i]) != ShapeOf(p.value)) {
      throw ShapeError("Adam::Step", ShapeOf(first_moment_[i]), ShapeOf(p.value));
    }
    RequireFinite(p.grad, "Adam::Step gradient of " + p.name);
    auto m = first_moment_[i].array();
    auto v = second_moment_[i].array();
    const auto g = p.grad.array();
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.square();
    p.value.array() -= lr * (m / bias1) / ((v / bias2).sqrt() + config_.epsilon);
    if (config_.weight_decay > 0.0) p.value *= decay;
  }
}

}  // namespace prefrank::diffcore
