#include "prefrank/diffcore/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "prefrank/common/random.hpp"

namespace prefrank::diffcore {

Mlp::Mlp(std::vector<int> widths, double dropout_rate, std::uint64_t seed, bool zero_output)
    : widths_(std::move(widths)), dropout_rate_(dropout_rate) {
  if (widths_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
  for (int w : widths_) {
    if (w < 1) throw std::invalid_argument("Mlp: layer widths must be positive");
  }
  if (!(dropout_rate_ >= 0.0 && dropout_rate_ < 1.0)) {
    throw std::invalid_argument("Mlp: dropout rate must be in [0, 1)");
  }
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int fan_in = widths_[l];
    const int fan_out = widths_[l + 1];
    const bool last = l + 2 == widths_.size();
    Tensor w(fan_in, fan_out);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = rng.Uniform(-limit, limit);
    if (last && zero_output) w.setZero();
    layers_.push_back(DenseLayer{Parameter("w" + std::to_string(l), std::move(w)),
                                 Parameter("b" + std::to_string(l), Tensor::Zero(1, fan_out))});
  }
}

Var Mlp::Forward(Graph& g, Var input, const ForwardOptions& opts) {
  if (g.value(input).cols() != input_width()) {
    throw ShapeError("Mlp::Forward", ShapeOf(g.value(input)),
                     "expected " + std::to_string(input_width()) + " input columns");
  }
  Var h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    DenseLayer& layer = layers_[l];
    Var w = opts.frozen ? g.Constant(layer.weight.value) : g.Param(layer.weight);
    Var b = opts.frozen ? g.Constant(layer.bias.value) : g.Param(layer.bias);
    h = g.Add(g.MatMul(h, w), b);
    if (l + 1 < layers_.size()) {
      h = g.LeakyRelu(h);
      if (opts.stochastic && dropout_rate_ > 0.0) {
        h = g.Dropout(h, dropout_rate_, DeriveSeed(opts.seed, l));
      }
    }
  }
  return h;
}

Tensor Mlp::Evaluate(const Tensor& input, const ForwardOptions& opts) const {
  Graph g;
  ForwardOptions frozen = opts;
  frozen.frozen = true;
  // Frozen forward never touches parameter state.
  Var out = const_cast<Mlp*>(this)->Forward(g, input, frozen);
  return g.value(out);
}

std::vector<Parameter*> Mlp::Parameters() {
  std::vector<Parameter*> params;
  for (auto& layer : layers_) {
    params.push_back(&layer.weight);
    params.push_back(&layer.bias);
  }
  return params;
}

void Mlp::ZeroGrad() {
  for (auto* p : Parameters()) p->ZeroGrad();
}

namespace {

nlohmann::json TensorValues(const Tensor& t) {
  nlohmann::json values = nlohmann::json::array();
  for (Index i = 0; i < t.size(); ++i) values.push_back(t.data()[i]);
  return values;
}

Tensor TensorFrom(const nlohmann::json& values, Index rows, Index cols, const char* what) {
  if (!values.is_array() || static_cast<Index>(values.size()) != rows * cols) {
    throw std::invalid_argument(std::string("Mlp::FromJson: bad ") + what + " array");
  }
  Tensor t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = values[static_cast<std::size_t>(i)].get<double>();
  RequireFinite(t, std::string("Mlp::FromJson ") + what);
  return t;
}

}  // namespace

nlohmann::json Mlp::ToJson() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : layers_) {
    layers.push_back({{"rows", layer.weight.value.rows()},
                      {"cols", layer.weight.value.cols()},
                      {"weights", TensorValues(layer.weight.value)},
                      {"bias", TensorValues(layer.bias.value)}});
  }
  return {{"widths", widths_}, {"dropout", dropout_rate_}, {"layers", std::move(layers)}};
}

Mlp Mlp::FromJson(const nlohmann::json& j) {
  Mlp m;
  m.widths_ = j.at("widths").get<std::vector<int>>();
  m.dropout_rate_ = j.at("dropout").get<double>();
  const auto& layers = j.at("layers");
  if (m.widths_.size() < 2 || layers.size() + 1 != m.widths_.size()) {
    throw std::invalid_argument("Mlp::FromJson: layer count does not match widths");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& lj = layers[l];
    const Index rows = lj.at("rows").get<Index>();
    const Index cols = lj.at("cols").get<Index>();
    if (rows != m.widths_[l] || cols != m.widths_[l + 1]) {
      throw std::invalid_argument("Mlp::FromJson: layer " + std::to_string(l) + " shape mismatch");
    }
    m.layers_.push_back(
        DenseLayer{Parameter("w" + std::to_string(l), TensorFrom(lj.at("weights"), rows, cols, "weights")),
                   Parameter("b" + std::to_string(l), TensorFrom(lj.at("bias"), 1, cols, "bias"))});
  }
  return m;
}

}  // namespace prefrank::diffcore
