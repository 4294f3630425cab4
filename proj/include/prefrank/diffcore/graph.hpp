#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prefrank/diffcore/tensor.hpp"

namespace prefrank::diffcore {

// A trainable array together with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::Zero(value.rows(), value.cols())) {}

  void ZeroGrad() { grad.setZero(value.rows(), value.cols()); }
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; only valid for its owning graph.
struct Var {
  int id = -1;
};

// Reverse-mode tape. Nodes are appended in evaluation order, which is a
// topological order, and Backward walks them once in reverse.
//
// Parameters enter through Param(); Backward accumulates into Parameter::grad.
// The graph keeps raw pointers to parameters, so they must outlive it.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  // Leaves.
  Var Constant(Tensor value);
  Var Param(Parameter& p);

  // Linear algebra and arithmetic.
  Var MatMul(Var a, Var b);
  // Same shape, or `b` a 1 x cols row broadcast over the rows of `a`.
  Var Add(Var a, Var b);
  Var Sub(Var a, Var b);
  Var Mul(Var a, Var b);
  Var Scale(Var a, double factor);
  Var AddScalar(Var a, double offset);

  // Elementwise nonlinearities.
  Var Sigmoid(Var a);
  Var LeakyRelu(Var a, double slope = 0.2);
  Var Softplus(Var a);
  Var Log(Var a);
  Var Square(Var a);
  Var Abs(Var a);
  // Gradient passes only where lo <= a <= hi.
  Var Clamp(Var a, double lo, double hi);

  // Reductions to 1 x 1.
  Var Mean(Var a);
  Var Sum(Var a);

  // Slicing.
  Var SliceCols(Var a, Index begin, Index count);
  Var SliceRows(Var a, Index begin, Index count);
  Var ConcatCols(Var a, Var b);

  // Stochastic nodes. Inverted dropout: at train time survivors are scaled by
  // 1 / (1 - rate); the mask is a deterministic function of (seed, shape).
  Var Dropout(Var a, double rate, std::uint64_t seed);
  // mu + eps * sigma with eps ~ N(0, 1) drawn from `seed`. With mu and sigma
  // of shape n x 1 and samples > 1, the result is n x samples.
  Var GaussianReparam(Var mu, Var sigma, std::uint64_t seed, Index samples = 1);

  const Tensor& value(Var v) const { return nodes_.at(Check(v)).value; }
  // Adjoint of `v` after Backward; zero-sized if no gradient reached it.
  const Tensor& grad(Var v) const { return nodes_.at(Check(v)).grad; }
  double scalar(Var v) const;

  // The noise drawn by a GaussianReparam node, or the mask of a Dropout node.
  const Tensor& aux(Var v) const { return nodes_.at(Check(v)).aux; }

  // Seeds the scalar loss with adjoint 1 and propagates to every reachable
  // parameter. Callable once per graph.
  void Backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    kConstant,
    kParam,
    kMatMul,
    kAdd,
    kAddRow,
    kSub,
    kMul,
    kScale,
    kAddScalar,
    kSigmoid,
    kLeakyRelu,
    kSoftplus,
    kLog,
    kSquare,
    kAbs,
    kClamp,
    kMean,
    kSum,
    kSliceCols,
    kSliceRows,
    kConcatCols,
    kDropout,
    kReparam,
  };

  struct Node {
    Op op = Op::kConstant;
    int lhs = -1;
    int rhs = -1;
    double a = 0.0;
    double b = 0.0;
    Index offset = 0;
    Tensor value;
    Tensor grad;
    Tensor aux;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  int Check(Var v) const;
  Var Push(Node node, const char* op_name);
  const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(Check(v))]; }
  Var Unary(Op op, Var a, Tensor value, const char* op_name);
  void Accumulate(int id, const Tensor& delta);
  void Propagate(Node& n);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace prefrank::diffcore
