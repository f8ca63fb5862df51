#pragma once

#include <memory>
#include <vector>

#include "nf/bijector.hpp"
#include "nf/rng.hpp"

namespace nf {

// Trainable invertible linear map y = P L U x. P is a frozen permutation,
// L is unit lower triangular, U is upper triangular with diagonal
// sign_i * exp(log_diag_i); the signs are frozen so the determinant never
// crosses zero. log|det| = sum(log_diag), independent of the input.
class LULinear final : public Bijector {
 public:
  // Identity map: P = I, L = I, U = I.
  static std::unique_ptr<LULinear> identity(Index dim);
  // LU factorization of a random orthogonal matrix (QR of a Gaussian draw).
  static std::unique_ptr<LULinear> randomOrthogonal(Index dim, CounterRng& rng);
  static std::unique_ptr<LULinear> fromJson(const nlohmann::ordered_json& j);

  Index dim() const override { return dim_; }
  std::string kind() const override { return "lu_linear"; }

  EagerStep forwardBatch(const Tensor& x) const override;
  EagerStep inverseBatch(const Tensor& y) const override;
  TapeStep forwardOnTape(Tape& t, NodeId x,
                         std::vector<ParamBinding>* bindings) override;
  // The inverse needs triangular solves, which the tape does not express.
  TapeStep inverseOnTape(Tape& t, NodeId y,
                         std::vector<ParamBinding>* bindings) override;

  std::vector<ParamRef> parameters() override;
  nlohmann::ordered_json toJson() const override;

  // Reconstructs the dense matrix P L U.
  Eigen::MatrixXd denseMatrix() const;

 private:
  explicit LULinear(Index dim);
  friend struct LuOps;

  Index dim_ = 0;
  std::vector<Index> perm_;  // P(i, perm_[i]) = 1
  Tensor pm_, pmT_;          // dense P and its transpose
  Tensor eye_, lmask_, umask_;
  Tensor diagSign_;                  // 1 x n of +-1, frozen
  Tensor lower_, upper_, logDiag_;   // trainable
};

}  // namespace nf
