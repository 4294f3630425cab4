#pragma once

#include <span>
#include <vector>

#include "prefrank/diffcore/graph.hpp"

namespace prefrank::diffcore {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled: applied as value *= (1 - lr * weight_decay) after the moment
  // update. With dropout this is the L2 prior term of the variational bound.
  double weight_decay = 0.0;
};

// Adam with decoupled weight decay. Moment buffers are bound to the parameter
// list on the first Step and checked on every later one.
class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  void Step(std::span<Parameter* const> params);

  long step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  AdamConfig config_;
  long step_count_ = 0;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
};

}  // namespace prefrank::diffcore
