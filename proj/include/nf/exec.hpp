#pragma once

#include <vector>

#include "nf/tape.hpp"
#include "nf/tensor.hpp"

namespace nf {

/// Pairs a trainable tensor's storage with the tape node it was read into,
/// so optimizers can route gradients back to the right storage.
struct ParamBinding {
  Tensor* storage;
  NodeId node;
};

/// Executors give bijector maps a single generic implementation that runs
/// either eagerly on tensors or by recording tape nodes. Both share the
/// kernels in tensor.hpp, so the two paths compute identical arithmetic.
struct EagerExec {
  using Value = Tensor;

  Value constant(Tensor v) const { return v; }
  Value param(const Tensor* storage) const { return *storage; }
  Index rowsOf(const Value& v) const { return v.rows(); }

  Value add(const Value& a, const Value& b) const { return nf::add(a, b); }
  Value sub(const Value& a, const Value& b) const { return nf::sub(a, b); }
  Value mul(const Value& a, const Value& b) const { return nf::mul(a, b); }
  Value matmul(const Value& a, const Value& b) const { return nf::matmul(a, b); }
  Value exp(const Value& a) const { return nf::exp(a); }
  Value log(const Value& a) const { return nf::log(a); }
  Value tanh(const Value& a) const { return nf::tanh(a); }
  Value relu(const Value& a) const { return nf::relu(a); }
  Value sum(const Value& a) const { return nf::sum(a); }
  Value rowSum(const Value& a) const { return nf::rowSum(a); }
  Value neg(const Value& a) const { return nf::neg(a); }
  Value reciprocal(const Value& a) const { return nf::reciprocal(a); }
  Value abs(const Value& a) const { return nf::abs(a); }
  Value transpose(const Value& a) const { return nf::transpose(a); }
  Value selectCols(const Value& a, std::vector<Index> idx) const {
    return nf::selectCols(a, idx);
  }
  Value scatterCols(const Value& a, std::vector<Index> idx, Index extent) const {
    return nf::scatterCols(a, idx, extent);
  }
  Value diagEmbed(const Value& a) const { return nf::diagEmbed(a); }
};

struct TapeExec {
  using Value = NodeId;

  Tape* tape;
  std::vector<ParamBinding>* bindings = nullptr;

  Value constant(Tensor v) const { return tape->constant(std::move(v)); }
  Value param(Tensor* storage) const {
    NodeId id = tape->parameter(*storage);
    if (bindings) bindings->push_back(ParamBinding{storage, id});
    return id;
  }
  Index rowsOf(Value v) const { return tape->value(v).rows(); }

  Value add(Value a, Value b) const { return tape->add(a, b); }
  Value sub(Value a, Value b) const { return tape->sub(a, b); }
  Value mul(Value a, Value b) const { return tape->mul(a, b); }
  Value matmul(Value a, Value b) const { return tape->matmul(a, b); }
  Value exp(Value a) const { return tape->exp(a); }
  Value log(Value a) const { return tape->log(a); }
  Value tanh(Value a) const { return tape->tanh(a); }
  Value relu(Value a) const { return tape->relu(a); }
  Value sum(Value a) const { return tape->sum(a); }
  Value rowSum(Value a) const { return tape->rowSum(a); }
  Value neg(Value a) const { return tape->neg(a); }
  Value reciprocal(Value a) const { return tape->reciprocal(a); }
  Value abs(Value a) const { return tape->abs(a); }
  Value transpose(Value a) const { return tape->transpose(a); }
  Value selectCols(Value a, std::vector<Index> idx) const {
    return tape->selectCols(a, std::move(idx));
  }
  Value scatterCols(Value a, std::vector<Index> idx, Index extent) const {
    return tape->scatterCols(a, std::move(idx), extent);
  }
  Value diagEmbed(Value a) const { return tape->diagEmbed(a); }
};

}  // namespace nf
