#pragma once

#include <memory>
#include <vector>

#include "nf/bijector.hpp"
#include "nf/rng.hpp"

namespace nf {

// Affine coupling layer. A conditioning subset of the coordinates passes
// through unchanged and drives a two-hidden-layer relu MLP whose output is
// split into a log-scale and a shift for the remaining coordinates. The
// log-scale is soft-clamped to (-4, 4) via 4*tanh(raw/4). Forward maps data
// toward the base distribution: z_t = (x_t - t) * exp(-log_s).
class AffineCoupling final : public Bijector {
 public:
  // Conditioning set {i : i % 2 == parity}. Hidden weights are He-normal
  // drawn from rng; the output layer starts at zero so the map is the
  // identity at initialization.
  AffineCoupling(Index dim, Index hidden, int parity, CounterRng& rng);
  AffineCoupling(Index dim, Index hidden, std::vector<Index> condIdx,
                 CounterRng& rng);

  Index dim() const override { return dim_; }
  std::string kind() const override { return "affine_coupling"; }

  EagerStep forwardBatch(const Tensor& x) const override;
  EagerStep inverseBatch(const Tensor& y) const override;
  TapeStep forwardOnTape(Tape& t, NodeId x,
                         std::vector<ParamBinding>* bindings) override;
  TapeStep inverseOnTape(Tape& t, NodeId y,
                         std::vector<ParamBinding>* bindings) override;

  std::vector<ParamRef> parameters() override;
  nlohmann::ordered_json toJson() const override;
  static std::unique_ptr<AffineCoupling> fromJson(
      const nlohmann::ordered_json& j);

  Index hidden() const { return hidden_; }
  const std::vector<Index>& condIndices() const { return condIdx_; }
  const std::vector<Index>& transIndices() const { return transIdx_; }

 private:
  AffineCoupling(Index dim, Index hidden, std::vector<Index> condIdx);
  friend struct CouplingOps;

  Index dim_ = 0;
  Index hidden_ = 0;
  std::vector<Index> condIdx_;
  std::vector<Index> transIdx_;
  Tensor w1_, b1_, w2_, b2_, w3_, b3_;
};

}  // namespace nf
