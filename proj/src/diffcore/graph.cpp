#include "prefrank/diffcore/graph.hpp"

#include <cmath>
#include <stdexcept>

#include "prefrank/common/numerics.hpp"
#include "prefrank/common/random.hpp"

namespace prefrank::diffcore {

int Graph::Check(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::out_of_range("diffcore: variable does not belong to this graph");
  }
  return v.id;
}

Var Graph::Push(Node node, const char* op_name) {
  if (!node.value.allFinite()) throw NonFiniteError(op_name);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

double Graph::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.size() != 1) throw ShapeError("scalar", ShapeOf(t), "expected 1 x 1");
  return t(0, 0);
}

Var Graph::Constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return Push(std::move(n), "Constant");
}

Var Graph::Param(Parameter& p) {
  Node n;
  n.op = Op::kParam;
  n.value = p.value;
  n.param = &p;
  n.needs_grad = true;
  return Push(std::move(n), "Param");
}

Var Graph::Unary(Op op, Var a, Tensor value, const char* op_name) {
  Node n;
  n.op = op;
  n.lhs = Check(a);
  n.needs_grad = node(a).needs_grad;
  n.value = std::move(value);
  return Push(std::move(n), op_name);
}

Var Graph::MatMul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.cols() != y.rows()) throw ShapeError("MatMul", ShapeOf(x), ShapeOf(y));
  Node n;
  n.op = Op::kMatMul;
  n.lhs = a.id;
  n.rhs = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = x * y;
  return Push(std::move(n), "MatMul");
}

Var Graph::Add(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  Node n;
  n.lhs = a.id;
  n.rhs = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  if (ShapeOf(x) == ShapeOf(y)) {
    n.op = Op::kAdd;
    n.value = x + y;
  } else if (y.rows() == 1 && y.cols() == x.cols()) {
    n.op = Op::kAddRow;
    n.value = x.rowwise() + y.row(0);
  } else {
    throw ShapeError("Add", ShapeOf(x), ShapeOf(y));
  }
  return Push(std::move(n), "Add");
}

Var Graph::Sub(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (ShapeOf(x) != ShapeOf(y)) throw ShapeError("Sub", ShapeOf(x), ShapeOf(y));
  Node n;
  n.op = Op::kSub;
  n.lhs = a.id;
  n.rhs = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = x - y;
  return Push(std::move(n), "Sub");
}

Var Graph::Mul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (ShapeOf(x) != ShapeOf(y)) throw ShapeError("Mul", ShapeOf(x), ShapeOf(y));
  Node n;
  n.op = Op::kMul;
  n.lhs = a.id;
  n.rhs = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = x.cwiseProduct(y);
  return Push(std::move(n), "Mul");
}

Var Graph::Scale(Var a, double factor) {
  Var v = Unary(Op::kScale, a, value(a) * factor, "Scale");
  nodes_.back().a = factor;
  return v;
}

Var Graph::AddScalar(Var a, double offset) {
  return Unary(Op::kAddScalar, a, (value(a).array() + offset).matrix(), "AddScalar");
}

Var Graph::Sigmoid(Var a) {
  return Unary(Op::kSigmoid, a, value(a).unaryExpr([](double z) { return prefrank::Sigmoid(z); }),
               "Sigmoid");
}

Var Graph::LeakyRelu(Var a, double slope) {
  Var v = Unary(Op::kLeakyRelu, a,
                value(a).unaryExpr([slope](double z) { return z > 0.0 ? z : slope * z; }),
                "LeakyRelu");
  nodes_.back().a = slope;
  return v;
}

Var Graph::Softplus(Var a) {
  return Unary(Op::kSoftplus, a,
               value(a).unaryExpr([](double z) { return prefrank::Softplus(z); }), "Softplus");
}

Var Graph::Log(Var a) {
  const Tensor& x = value(a);
  if ((x.array() <= 0.0).any()) throw NonFiniteError("Log of non-positive input");
  return Unary(Op::kLog, a, x.array().log().matrix(), "Log");
}

Var Graph::Square(Var a) {
  return Unary(Op::kSquare, a, value(a).array().square().matrix(), "Square");
}

Var Graph::Abs(Var a) { return Unary(Op::kAbs, a, value(a).cwiseAbs(), "Abs"); }

Var Graph::Clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("Clamp: lo > hi");
  Var v = Unary(Op::kClamp, a, value(a).cwiseMax(lo).cwiseMin(hi), "Clamp");
  nodes_.back().a = lo;
  nodes_.back().b = hi;
  return v;
}

Var Graph::Mean(Var a) {
  const Tensor& x = value(a);
  if (x.size() == 0) throw ShapeError("Mean", ShapeOf(x), "empty input");
  Tensor out(1, 1);
  out(0, 0) = x.mean();
  return Unary(Op::kMean, a, std::move(out), "Mean");
}

Var Graph::Sum(Var a) {
  Tensor out(1, 1);
  out(0, 0) = value(a).sum();
  return Unary(Op::kSum, a, std::move(out), "Sum");
}

Var Graph::SliceCols(Var a, Index begin, Index count) {
  const Tensor& x = value(a);
  if (begin < 0 || count < 0 || begin + count > x.cols()) {
    throw ShapeError("SliceCols", ShapeOf(x), "column range out of bounds");
  }
  Var v = Unary(Op::kSliceCols, a, x.middleCols(begin, count), "SliceCols");
  nodes_.back().offset = begin;
  return v;
}

Var Graph::SliceRows(Var a, Index begin, Index count) {
  const Tensor& x = value(a);
  if (begin < 0 || count < 0 || begin + count > x.rows()) {
    throw ShapeError("SliceRows", ShapeOf(x), "row range out of bounds");
  }
  Var v = Unary(Op::kSliceRows, a, x.middleRows(begin, count), "SliceRows");
  nodes_.back().offset = begin;
  return v;
}

Var Graph::ConcatCols(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.rows() != y.rows()) throw ShapeError("ConcatCols", ShapeOf(x), ShapeOf(y));
  Node n;
  n.op = Op::kConcatCols;
  n.lhs = a.id;
  n.rhs = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value.resize(x.rows(), x.cols() + y.cols());
  n.value << x, y;
  return Push(std::move(n), "ConcatCols");
}

Var Graph::Dropout(Var a, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("Dropout: rate must be in [0, 1)");
  const Tensor& x = value(a);
  Tensor mask(x.rows(), x.cols());
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.Uniform() < rate ? 0.0 : keep_scale;
  }
  Var v = Unary(Op::kDropout, a, x.cwiseProduct(mask), "Dropout");
  nodes_.back().aux = std::move(mask);
  return v;
}

Var Graph::GaussianReparam(Var mu, Var sigma, std::uint64_t seed, Index samples) {
  const Tensor& m = value(mu);
  const Tensor& s = value(sigma);
  if (ShapeOf(m) != ShapeOf(s)) throw ShapeError("GaussianReparam", ShapeOf(m), ShapeOf(s));
  if ((s.array() < 0.0).any()) throw std::invalid_argument("GaussianReparam: sigma must be >= 0");
  if (samples < 1) throw std::invalid_argument("GaussianReparam: samples must be >= 1");
  if (samples > 1 && m.cols() != 1) {
    throw ShapeError("GaussianReparam", ShapeOf(m), "multi-sample draw needs a column input");
  }
  const Index cols = samples > 1 ? samples : m.cols();
  Tensor eps(m.rows(), cols);
  Rng rng(seed);
  for (Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng.Normal();

  Node n;
  n.op = Op::kReparam;
  n.lhs = mu.id;
  n.rhs = sigma.id;
  n.needs_grad = node(mu).needs_grad || node(sigma).needs_grad;
  n.value.resize(m.rows(), cols);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Index src = samples > 1 ? 0 : c;
      n.value(r, c) = m(r, src) + eps(r, c) * s(r, src);
    }
  }
  n.aux = std::move(eps);
  return Push(std::move(n), "GaussianReparam");
}

void Graph::Accumulate(int id, const Tensor& delta) {
  Node& target = nodes_[static_cast<std::size_t>(id)];
  if (!target.needs_grad) return;
  if (target.grad.size() == 0) {
    target.grad = delta;
  } else {
    target.grad += delta;
  }
}

void Graph::Backward(Var loss) {
  const Tensor& out = value(loss);
  if (out.size() != 1) throw ShapeError("Backward", ShapeOf(out), "loss must be scalar");
  if (!out.allFinite()) throw NonFiniteError("Backward loss");
  if (backward_done_) throw std::logic_error("Backward: already called on this graph");
  backward_done_ = true;

  nodes_[static_cast<std::size_t>(loss.id)].grad = Tensor::Ones(1, 1);
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    Propagate(n);
  }
}

void Graph::Propagate(Node& n) {
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::kConstant:
      break;
    case Op::kParam:
      if (n.param->grad.size() == 0) n.param->ZeroGrad();
      n.param->grad += g;
      break;
    case Op::kMatMul: {
      const Tensor& x = nodes_[n.lhs].value;
      const Tensor& y = nodes_[n.rhs].value;
      if (nodes_[n.lhs].needs_grad) Accumulate(n.lhs, g * y.transpose());
      if (nodes_[n.rhs].needs_grad) Accumulate(n.rhs, x.transpose() * g);
      break;
    }
    case Op::kAdd:
      Accumulate(n.lhs, g);
      Accumulate(n.rhs, g);
      break;
    case Op::kAddRow:
      Accumulate(n.lhs, g);
      if (nodes_[n.rhs].needs_grad) Accumulate(n.rhs, g.colwise().sum());
      break;
    case Op::kSub:
      Accumulate(n.lhs, g);
      if (nodes_[n.rhs].needs_grad) Accumulate(n.rhs, -g);
      break;
    case Op::kMul: {
      const Tensor& x = nodes_[n.lhs].value;
      const Tensor& y = nodes_[n.rhs].value;
      if (nodes_[n.lhs].needs_grad) Accumulate(n.lhs, g.cwiseProduct(y));
      if (nodes_[n.rhs].needs_grad) Accumulate(n.rhs, g.cwiseProduct(x));
      break;
    }
    case Op::kScale:
      Accumulate(n.lhs, g * n.a);
      break;
    case Op::kAddScalar:
      Accumulate(n.lhs, g);
      break;
    case Op::kSigmoid: {
      const Tensor& s = n.value;
      Accumulate(n.lhs, (g.array() * s.array() * (1.0 - s.array())).matrix());
      break;
    }
    case Op::kLeakyRelu: {
      const Tensor& x = nodes_[n.lhs].value;
      const double slope = n.a;
      Accumulate(n.lhs, g.binaryExpr(x, [slope](double gi, double xi) {
        return xi > 0.0 ? gi : slope * gi;
      }));
      break;
    }
    case Op::kSoftplus: {
      const Tensor& x = nodes_[n.lhs].value;
      Accumulate(n.lhs, g.binaryExpr(x, [](double gi, double xi) {
        return gi * prefrank::Sigmoid(xi);
      }));
      break;
    }
    case Op::kLog: {
      const Tensor& x = nodes_[n.lhs].value;
      Accumulate(n.lhs, (g.array() / x.array()).matrix());
      break;
    }
    case Op::kSquare: {
      const Tensor& x = nodes_[n.lhs].value;
      Accumulate(n.lhs, (2.0 * g.array() * x.array()).matrix());
      break;
    }
    case Op::kAbs: {
      const Tensor& x = nodes_[n.lhs].value;
      Accumulate(n.lhs, g.binaryExpr(x, [](double gi, double xi) {
        return xi > 0.0 ? gi : (xi < 0.0 ? -gi : 0.0);
      }));
      break;
    }
    case Op::kClamp: {
      const Tensor& x = nodes_[n.lhs].value;
      const double lo = n.a;
      const double hi = n.b;
      Accumulate(n.lhs, g.binaryExpr(x, [lo, hi](double gi, double xi) {
        return (xi >= lo && xi <= hi) ? gi : 0.0;
      }));
      break;
    }
    case Op::kMean: {
      const Tensor& x = nodes_[n.lhs].value;
      const double share = g(0, 0) / static_cast<double>(x.size());
      Accumulate(n.lhs, Tensor::Constant(x.rows(), x.cols(), share));
      break;
    }
    case Op::kSum: {
      const Tensor& x = nodes_[n.lhs].value;
      Accumulate(n.lhs, Tensor::Constant(x.rows(), x.cols(), g(0, 0)));
      break;
    }
    case Op::kSliceCols: {
      const Tensor& x = nodes_[n.lhs].value;
      Tensor full = Tensor::Zero(x.rows(), x.cols());
      full.middleCols(n.offset, g.cols()) = g;
      Accumulate(n.lhs, full);
      break;
    }
    case Op::kSliceRows: {
      const Tensor& x = nodes_[n.lhs].value;
      Tensor full = Tensor::Zero(x.rows(), x.cols());
      full.middleRows(n.offset, g.rows()) = g;
      Accumulate(n.lhs, full);
      break;
    }
    case Op::kConcatCols: {
      const Index left = nodes_[n.lhs].value.cols();
      if (nodes_[n.lhs].needs_grad) Accumulate(n.lhs, g.leftCols(left));
      if (nodes_[n.rhs].needs_grad) Accumulate(n.rhs, g.rightCols(g.cols() - left));
      break;
    }
    case Op::kDropout:
      Accumulate(n.lhs, g.cwiseProduct(n.aux));
      break;
    case Op::kReparam: {
      const Tensor& mu = nodes_[n.lhs].value;
      if (n.value.cols() == mu.cols()) {
        Accumulate(n.lhs, g);
        if (nodes_[n.rhs].needs_grad) Accumulate(n.rhs, g.cwiseProduct(n.aux));
      } else {
        Accumulate(n.lhs, g.rowwise().sum());
        if (nodes_[n.rhs].needs_grad) Accumulate(n.rhs, g.cwiseProduct(n.aux).rowwise().sum());
      }
      break;
    }
  }
}

}  // namespace prefrank::diffcore
