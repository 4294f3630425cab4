#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefrank/diffcore/graph.hpp"

namespace prefrank::diffcore {

struct DenseLayer {
  Parameter weight;  // in x out
  Parameter bias;    // 1 x out
};

struct ForwardOptions {
  // Sample dropout masks. Ignored when the network's dropout rate is zero.
  bool stochastic = false;
  std::uint64_t seed = 0;
  // Enter weights as constants: gradients reach the input but not the weights.
  bool frozen = false;
};

// Fully connected network: leaky-rectifier + dropout after every hidden
// layer, linear output.
class Mlp {
 public:
  Mlp() = default;
  // widths = {input, hidden..., output}; weights drawn with a scaled uniform
  // initializer. `zero_output` starts the last layer at zero.
  Mlp(std::vector<int> widths, double dropout_rate, std::uint64_t seed, bool zero_output = false);

  Var Forward(Graph& g, Var input, const ForwardOptions& opts);
  Var Forward(Graph& g, const Tensor& input, const ForwardOptions& opts) {
    return Forward(g, g.Constant(input), opts);
  }

  // Value-only evaluation without a caller-owned graph.
  Tensor Evaluate(const Tensor& input, const ForwardOptions& opts = {}) const;

  std::vector<Parameter*> Parameters();
  void ZeroGrad();

  const std::vector<int>& widths() const { return widths_; }
  int input_width() const { return widths_.front(); }
  int output_width() const { return widths_.back(); }
  double dropout_rate() const { return dropout_rate_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  // {"widths", "dropout", "layers": [{"rows", "cols", "weights", "bias"}]},
  // weights row-major; doubles are written with round-trip precision.
  nlohmann::json ToJson() const;
  static Mlp FromJson(const nlohmann::json& j);

 private:
  std::vector<int> widths_;
  double dropout_rate_ = 0.0;
  std::vector<DenseLayer> layers_;
};

}  // namespace prefrank::diffcore
