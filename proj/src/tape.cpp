#include "nf/tape.hpp"

#include <string>

namespace nf {
namespace {

// Sums an adjoint down to the shape of a broadcast scalar operand.
Tensor reduceToScalarShape(const Tensor& grad, const Tensor& operand) {
  Tensor s = sum(grad);
  return Tensor::fromFlat(operand.shape(), s.data());
}

Tensor zerosLike(const Tensor& t) { return Tensor::zeros(t.shape()); }

}  // namespace

const Tensor& Tape::Gradients::at(NodeId id) const {
  if (!has(id)) throw ShapeError("gradients: unknown node id");
  return byNode_[id];
}

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

void Tape::checkId(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
    throw ShapeError("tape: node id out of range");
}

NodeId Tape::unary(OpKind kind, NodeId a, Tensor v) {
  checkId(a);
  return push(Node{kind, a, -1, std::move(v), {}, 0});
}

NodeId Tape::binary(OpKind kind, NodeId a, NodeId b, Tensor v) {
  checkId(a);
  checkId(b);
  return push(Node{kind, a, b, std::move(v), {}, 0});
}

NodeId Tape::constant(Tensor v) {
  return push(Node{OpKind::kConstant, -1, -1, std::move(v), {}, 0});
}

NodeId Tape::parameter(Tensor v) {
  NodeId id = push(Node{OpKind::kParameter, -1, -1, std::move(v), {}, 0});
  params_.push_back(id);
  return id;
}

NodeId Tape::add(NodeId a, NodeId b) {
  return binary(OpKind::kAdd, a, b, nf::add(value(a), value(b)));
}
NodeId Tape::sub(NodeId a, NodeId b) {
  return binary(OpKind::kSub, a, b, nf::sub(value(a), value(b)));
}
NodeId Tape::mul(NodeId a, NodeId b) {
  return binary(OpKind::kMul, a, b, nf::mul(value(a), value(b)));
}
NodeId Tape::matmul(NodeId a, NodeId b) {
  return binary(OpKind::kMatMul, a, b, nf::matmul(value(a), value(b)));
}
NodeId Tape::exp(NodeId a) { return unary(OpKind::kExp, a, nf::exp(value(a))); }
NodeId Tape::log(NodeId a) { return unary(OpKind::kLog, a, nf::log(value(a))); }
NodeId Tape::tanh(NodeId a) {
  return unary(OpKind::kTanh, a, nf::tanh(value(a)));
}
NodeId Tape::relu(NodeId a) {
  return unary(OpKind::kRelu, a, nf::relu(value(a)));
}
NodeId Tape::sum(NodeId a) { return unary(OpKind::kSum, a, nf::sum(value(a))); }
NodeId Tape::rowSum(NodeId a) {
  return unary(OpKind::kRowSum, a, nf::rowSum(value(a)));
}
NodeId Tape::neg(NodeId a) { return unary(OpKind::kNeg, a, nf::neg(value(a))); }
NodeId Tape::reciprocal(NodeId a) {
  return unary(OpKind::kReciprocal, a, nf::reciprocal(value(a)));
}
NodeId Tape::abs(NodeId a) { return unary(OpKind::kAbs, a, nf::abs(value(a))); }
NodeId Tape::transpose(NodeId a) {
  return unary(OpKind::kTranspose, a, nf::transpose(value(a)));
}

NodeId Tape::selectCols(NodeId a, std::vector<Index> idx) {
  checkId(a);
  Tensor v = nf::selectCols(value(a), idx);
  return push(Node{OpKind::kSelectCols, a, -1, std::move(v), std::move(idx), 0});
}

NodeId Tape::scatterCols(NodeId a, std::vector<Index> idx, Index extent) {
  checkId(a);
  Tensor v = nf::scatterCols(value(a), idx, extent);
  return push(
      Node{OpKind::kScatterCols, a, -1, std::move(v), std::move(idx), extent});
}

NodeId Tape::diagEmbed(NodeId a) {
  return unary(OpKind::kDiagEmbed, a, nf::diagEmbed(value(a)));
}

Tape::Gradients Tape::backward(NodeId loss) const {
  checkId(loss);
  if (!value(loss).isScalar())
    throw ShapeError("backward: loss must be a scalar, got " +
                     shapeString(value(loss)));

  Gradients g(size());
  auto& adj = g.byNode_;
  adj[loss] = Tensor::fromFlat(value(loss).shape(), Eigen::ArrayXd::Ones(1));

  // Accumulates into the adjoint of node `id`, materializing zeros first.
  auto accum = [&](NodeId id, const Tensor& contrib) {
    if (adj[id].size() == 0) adj[id] = zerosLike(value(id));
    adj[id] = nf::add(adj[id], contrib);
  };
  // For elementwise binaries where one operand may be a broadcast scalar.
  auto accumBroadcast = [&](NodeId id, const Tensor& contrib) {
    const Tensor& v = value(id);
    if (v.isScalar() && !contrib.isScalar())
      accum(id, reduceToScalarShape(contrib, v));
    else
      accum(id, contrib);
  };

  for (NodeId id = loss; id >= 0; --id) {
    if (adj[id].size() == 0) continue;
    const Node& n = nodes_[id];
    const Tensor& d = adj[id];
    switch (n.kind) {
      case OpKind::kConstant:
      case OpKind::kParameter:
        break;
      case OpKind::kAdd:
        accumBroadcast(n.a, d);
        accumBroadcast(n.b, d);
        break;
      case OpKind::kSub:
        accumBroadcast(n.a, d);
        accumBroadcast(n.b, nf::neg(d));
        break;
      case OpKind::kMul:
        accumBroadcast(n.a, nf::mul(d, value(n.b)));
        accumBroadcast(n.b, nf::mul(d, value(n.a)));
        break;
      case OpKind::kMatMul:
        accum(n.a, nf::matmul(d, nf::transpose(value(n.b))));
        accum(n.b, nf::matmul(nf::transpose(value(n.a)), d));
        break;
      case OpKind::kExp:
        accum(n.a, nf::mul(d, n.value));
        break;
      case OpKind::kLog:
        accum(n.a, nf::mul(d, nf::reciprocal(value(n.a))));
        break;
      case OpKind::kTanh: {
        Tensor one = Tensor::ones(n.value.shape());
        accum(n.a, nf::mul(d, nf::sub(one, nf::mul(n.value, n.value))));
        break;
      }
      case OpKind::kRelu: {
        const Tensor& x = value(n.a);
        Tensor m = Tensor::fromFlat(
            x.shape(), (x.data() > 0.0).cast<double>());
        accum(n.a, nf::mul(d, m));
        break;
      }
      case OpKind::kSum: {
        const Tensor& x = value(n.a);
        Tensor b = Tensor::fromFlat(
            x.shape(), Eigen::ArrayXd::Constant(x.size(), d.at(0)));
        accum(n.a, b);
        break;
      }
      case OpKind::kRowSum: {
        const Tensor& x = value(n.a);
        Tensor b = Tensor::zeros(x.shape());
        for (Index i = 0; i < x.rows(); ++i)
          for (Index j = 0; j < x.cols(); ++j) b.at(i, j) = d.at(i, 0);
        accum(n.a, b);
        break;
      }
      case OpKind::kNeg:
        accum(n.a, nf::neg(d));
        break;
      case OpKind::kReciprocal:
        accum(n.a, nf::neg(nf::mul(d, nf::mul(n.value, n.value))));
        break;
      case OpKind::kAbs: {
        const Tensor& x = value(n.a);
        Tensor s = Tensor::fromFlat(
            x.shape(), (x.data() > 0.0).cast<double>() -
                           (x.data() < 0.0).cast<double>());
        accum(n.a, nf::mul(d, s));
        break;
      }
      case OpKind::kTranspose:
        accum(n.a, nf::transpose(d));
        break;
      case OpKind::kSelectCols:
        accum(n.a, nf::scatterCols(d, n.cols, value(n.a).cols()));
        break;
      case OpKind::kScatterCols:
        accum(n.a, nf::selectCols(d, n.cols));
        break;
      case OpKind::kDiagEmbed: {
        const Tensor& x = value(n.a);
        Tensor b = Tensor::zeros(x.shape());
        for (Index i = 0; i < x.size(); ++i) b.at(i) = d.at(i, i);
        accum(n.a, b);
        break;
      }
    }
  }

  // Parameters untouched by the loss still report (zero) gradients.
  for (NodeId p : params_)
    if (adj[p].size() == 0) adj[p] = zerosLike(value(p));
  return g;
}

}  // namespace nf
