#pragma once

#include <vector>

#include "nf/tensor.hpp"

namespace nf {

using NodeId = Index;

enum class OpKind {
  kConstant,
  kParameter,
  kAdd,
  kSub,
  kMul,
  kMatMul,
  kExp,
  kLog,
  kTanh,
  kRelu,
  kSum,
  kRowSum,
  kNeg,
  kReciprocal,
  kAbs,
  kTranspose,
  kSelectCols,
  kScatterCols,
  kDiagEmbed,
};

/// Reverse-mode autodiff over an append-only list of eagerly evaluated
/// nodes. Each node caches its value; inputs always reference earlier nodes,
/// so the list is topologically ordered by construction. backward() walks it
/// once in reverse with a fixed adjoint accumulation order, which makes
/// gradients bit-identical across runs of the same build.
///
/// Subgradient conventions: relu and abs use gradient 0 at 0.
class Tape {
 public:
  struct Node {
    OpKind kind;
    NodeId a = -1;
    NodeId b = -1;
    Tensor value;
    std::vector<Index> cols;  // kSelectCols / kScatterCols
    Index extent = 0;         // kScatterCols output width
  };

  NodeId constant(Tensor v);
  /// Like constant, but the node id is recorded as trainable.
  NodeId parameter(Tensor v);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId tanh(NodeId a);
  NodeId relu(NodeId a);
  NodeId sum(NodeId a);
  NodeId rowSum(NodeId a);
  NodeId neg(NodeId a);
  NodeId reciprocal(NodeId a);
  NodeId abs(NodeId a);
  NodeId transpose(NodeId a);
  NodeId selectCols(NodeId a, std::vector<Index> idx);
  NodeId scatterCols(NodeId a, std::vector<Index> idx, Index extent);
  NodeId diagEmbed(NodeId a);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  Index size() const { return static_cast<Index>(nodes_.size()); }
  const std::vector<NodeId>& parameterIds() const { return params_; }

  /// Gradients of a scalar loss with respect to every parameter node.
  /// Parameters the loss does not depend on get zero gradients.
  class Gradients {
   public:
    explicit Gradients(Index nodeCount) : byNode_(nodeCount) {}
    const Tensor& at(NodeId id) const;
    bool has(NodeId id) const {
      return id >= 0 && id < static_cast<Index>(byNode_.size()) &&
             byNode_[id].size() > 0;
    }

   private:
    friend class Tape;
    std::vector<Tensor> byNode_;
  };

  Gradients backward(NodeId loss) const;

 private:
  NodeId push(Node n);
  NodeId unary(OpKind kind, NodeId a, Tensor v);
  NodeId binary(OpKind kind, NodeId a, NodeId b, Tensor v);
  void checkId(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<NodeId> params_;
};

}  // namespace nf
