#pragma once

#include <json.hpp>

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "nf/exec.hpp"
#include "nf/rng.hpp"
#include "nf/tape.hpp"
#include "nf/tensor.hpp"

namespace nf {

/// One bijector step over a batch: rows of y are the mapped points, logDet
/// is a (rows x 1) tensor of per-point log|det J| values.
struct EagerStep {
  Tensor y;
  Tensor logDet;
};

struct TapeStep {
  NodeId y;
  NodeId logDet;
};

/// Named trainable tensor owned by a bijector.
struct ParamRef {
  std::string name;
  Tensor* value;
};

/// Invertible map with tractable log-determinant. The forward direction is
/// the normalizing direction (data to latent). Batch arguments are rank-2
/// tensors whose rows are points.
///
/// Contracts every implementation keeps:
///   inverse(forward(x)) == x within round-trip tolerance,
///   forward log-det + inverse log-det == 0 at corresponding points,
///   log-det matches the numerical Jacobian of the map.
class Bijector {
 public:
  virtual ~Bijector() = default;

  virtual Index dim() const = 0;
  virtual std::string kind() const = 0;

  virtual EagerStep forwardBatch(const Tensor& x) const = 0;
  virtual EagerStep inverseBatch(const Tensor& y) const = 0;
  virtual TapeStep forwardOnTape(Tape& t, NodeId x,
                                 std::vector<ParamBinding>* bindings) = 0;
  virtual TapeStep inverseOnTape(Tape& t, NodeId y,
                                 std::vector<ParamBinding>* bindings) = 0;

  virtual std::vector<ParamRef> parameters() { return {}; }
  virtual nlohmann::ordered_json toJson() const = 0;

  /// Single-point convenience wrappers around the batch interface.
  std::pair<Eigen::VectorXd, double> forward(const Eigen::VectorXd& x) const;
  std::pair<Eigen::VectorXd, double> inverse(const Eigen::VectorXd& y) const;

 protected:
  void checkBatch(const Tensor& b, const char* who) const;
};

/// Fixed (non-trainable) invertible linear map y = M x. The inverse and
/// log|det M| are computed once at construction; M must satisfy
/// |det M| > 1e-12.
class FixedLinear : public Bijector {
 public:
  explicit FixedLinear(Eigen::MatrixXd m);

  Index dim() const override { return m_.rows(); }
  std::string kind() const override { return "fixed_linear"; }
  const Eigen::MatrixXd& matrix() const { return m_; }
  const Eigen::MatrixXd& inverseMatrix() const { return mInv_; }
  double logAbsDet() const { return logAbsDet_; }

  EagerStep forwardBatch(const Tensor& x) const override;
  EagerStep inverseBatch(const Tensor& y) const override;
  TapeStep forwardOnTape(Tape& t, NodeId x,
                         std::vector<ParamBinding>* bindings) override;
  TapeStep inverseOnTape(Tape& t, NodeId y,
                         std::vector<ParamBinding>* bindings) override;
  nlohmann::ordered_json toJson() const override;

 private:
  Eigen::MatrixXd m_, mInv_;
  double logAbsDet_;
  Tensor mT_, mInvT_;  // transposed copies for row-batch products
};

/// Planar map y1 = x1 * (1 + x2 / divisor), y2 = x2. Defined for
/// x2 > -divisor; log|det J| = log(1 + x2 / divisor).
class NonlinearShear2D : public Bijector {
 public:
  explicit NonlinearShear2D(double divisor = 40.0);

  Index dim() const override { return 2; }
  std::string kind() const override { return "nonlinear_shear2d"; }
  double divisor() const { return divisor_; }

  EagerStep forwardBatch(const Tensor& x) const override;
  EagerStep inverseBatch(const Tensor& y) const override;
  TapeStep forwardOnTape(Tape& t, NodeId x,
                         std::vector<ParamBinding>* bindings) override;
  TapeStep inverseOnTape(Tape& t, NodeId y,
                         std::vector<ParamBinding>* bindings) override;
  nlohmann::ordered_json toJson() const override;

 private:
  double divisor_;
};

/// Scalar map y = c * x^2 on x > 0.
class SquareScale1D : public Bijector {
 public:
  explicit SquareScale1D(double coefficient);

  Index dim() const override { return 1; }
  std::string kind() const override { return "square_scale1d"; }
  double coefficient() const { return coefficient_; }

  EagerStep forwardBatch(const Tensor& x) const override;
  EagerStep inverseBatch(const Tensor& y) const override;
  TapeStep forwardOnTape(Tape& t, NodeId x,
                         std::vector<ParamBinding>* bindings) override;
  TapeStep inverseOnTape(Tape& t, NodeId y,
                         std::vector<ParamBinding>* bindings) override;
  nlohmann::ordered_json toJson() const override;

 private:
  double coefficient_;
};

/// Elementwise logit squash used for dequantized pixels:
/// y = log(x' / (1 - x')) with x' = eps + (1 - 2 eps) x.
class LogitSquash : public Bijector {
 public:
  explicit LogitSquash(Index dim, double eps = 0.05);

  Index dim() const override { return dim_; }
  std::string kind() const override { return "logit_squash"; }
  double eps() const { return eps_; }

  EagerStep forwardBatch(const Tensor& x) const override;
  EagerStep inverseBatch(const Tensor& y) const override;
  TapeStep forwardOnTape(Tape& t, NodeId x,
                         std::vector<ParamBinding>* bindings) override;
  TapeStep inverseOnTape(Tape& t, NodeId y,
                         std::vector<ParamBinding>* bindings) override;
  nlohmann::ordered_json toJson() const override;

 private:
  Index dim_;
  double eps_;
};

/// Direction-swapping adapter: forward(x) = inner.inverse(x) and vice
/// versa, with log-dets negated accordingly by the inner map.
class Inverted : public Bijector {
 public:
  explicit Inverted(std::unique_ptr<Bijector> inner);

  Index dim() const override { return inner_->dim(); }
  std::string kind() const override { return "inverted"; }
  Bijector& inner() { return *inner_; }

  EagerStep forwardBatch(const Tensor& x) const override;
  EagerStep inverseBatch(const Tensor& y) const override;
  TapeStep forwardOnTape(Tape& t, NodeId x,
                         std::vector<ParamBinding>* bindings) override;
  TapeStep inverseOnTape(Tape& t, NodeId y,
                         std::vector<ParamBinding>* bindings) override;
  std::vector<ParamRef> parameters() override { return inner_->parameters(); }
  nlohmann::ordered_json toJson() const override;

 private:
  std::unique_ptr<Bijector> inner_;
};

/// Composition of bijectors applied in order in the forward direction.
/// Per-point log-dets are accumulated in step order. An empty chain is the
/// identity and reports dim() == 0 (any width).
class Chain : public Bijector {
 public:
  Chain() = default;
  explicit Chain(std::vector<std::unique_ptr<Bijector>> steps);

  void append(std::unique_ptr<Bijector> step);
  Index stepCount() const { return static_cast<Index>(steps_.size()); }
  Bijector& step(Index i) { return *steps_[i]; }
  const Bijector& step(Index i) const { return *steps_[i]; }

  Index dim() const override { return steps_.empty() ? 0 : steps_[0]->dim(); }
  std::string kind() const override { return "chain"; }

  EagerStep forwardBatch(const Tensor& x) const override;
  EagerStep inverseBatch(const Tensor& y) const override;
  TapeStep forwardOnTape(Tape& t, NodeId x,
                         std::vector<ParamBinding>* bindings) override;
  TapeStep inverseOnTape(Tape& t, NodeId y,
                         std::vector<ParamBinding>* bindings) override;
  std::vector<ParamRef> parameters() override;
  nlohmann::ordered_json toJson() const override;

 private:
  std::vector<std::unique_ptr<Bijector>> steps_;
};

/// Reconstructs a bijector from its toJson() form.
std::unique_ptr<Bijector> bijectorFromJson(const nlohmann::ordered_json& j);

}  // namespace nf
