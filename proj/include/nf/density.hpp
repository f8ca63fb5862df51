#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "nf/bijector.hpp"
#include "nf/rng.hpp"

namespace nf {

/// Base distribution over the latent space. logProbRows returns plain
/// doubles so out-of-support points can report -inf without tripping the
/// tensor kernels' finiteness checks.
class BaseDistribution {
 public:
  virtual ~BaseDistribution() = default;
  virtual Index dim() const = 0;
  virtual std::string kind() const = 0;
  /// Per-row log density of a (rows x dim) batch. May contain -inf.
  virtual Eigen::VectorXd logProbRows(const Tensor& z) const = 0;
};

/// N(0, I). log p(z) = -(n/2) ln(2 pi) - 1/2 sum(z_i^2), with the square sum
/// accumulated left to right.
class DiagonalStandardNormal final : public BaseDistribution {
 public:
  explicit DiagonalStandardNormal(Index dim);

  Index dim() const override { return dim_; }
  std::string kind() const override { return "diagonal_standard_normal"; }
  Eigen::VectorXd logProbRows(const Tensor& z) const override;

  /// Scalar node holding the total log density of the whole batch:
  /// rows * c - 1/2 * sum(Z * Z). Used by the training loss.
  NodeId logProbTotalOnTape(Tape& t, NodeId z) const;

 private:
  Index dim_;
};

/// Uniform on [lo, hi], one-dimensional. Points up to 1e-9 outside the
/// interval still count as inside so that endpoints surviving a round trip
/// through a bijector stay in support; everything else gets -inf.
class UniformInterval final : public BaseDistribution {
 public:
  UniformInterval(double lo, double hi);

  Index dim() const override { return 1; }
  std::string kind() const override { return "uniform_interval"; }
  Eigen::VectorXd logProbRows(const Tensor& z) const override;

  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  double lo_, hi_;
};

/// Transformed distribution: a base density pushed through the inverse of a
/// data-to-latent chain. ln p(x) = base ln p(chain.forward(x)) + forward
/// log|det J|; sampling draws z from the base and applies chain.inverse.
class FlowModel {
 public:
  FlowModel(std::unique_ptr<BaseDistribution> base, Chain chain);

  Index dim() const { return base_->dim(); }
  const BaseDistribution& base() const { return *base_; }
  Chain& chain() { return chain_; }
  const Chain& chain() const { return chain_; }

  double logProb(const Eigen::VectorXd& x) const;
  /// Per-row log density; -inf marks out-of-support rows.
  Eigen::VectorXd logProbBatch(const Tensor& x) const;

  /// count x dim tensor of draws; bit-identical for identical seeds.
  Tensor sample(Index count, std::uint64_t seed) const;

  /// Midpoint-rule integral of the density over an axis-aligned box,
  /// supported for dim <= 2. The step is adjusted to divide each side
  /// evenly.
  double gridIntegral(const std::vector<std::pair<double, double>>& box,
                      double step) const;

 private:
  std::unique_ptr<BaseDistribution> base_;
  Chain chain_;
};

}  // namespace nf
