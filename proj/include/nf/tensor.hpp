#pragma once

#include <Eigen/Core>
#include <initializer_list>
#include <vector>

#include "nf/common.hpp"

namespace nf {

/// Dense 64-bit-float array with shape metadata and flat row-major storage.
/// Rank 0 is a scalar, rank 1 a vector, rank 2 a matrix. Every public
/// operation leaves all elements finite or throws NumericError.
///
/// Reductions and matrix products accumulate strictly left to right in flat
/// row-major order, so repeated runs of the same build are bit-identical.
class Tensor {
 public:
  Tensor() = default;

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<Index> shape);
  static Tensor ones(std::vector<Index> shape);
  static Tensor fromFlat(std::vector<Index> shape, Eigen::ArrayXd data);
  static Tensor vector(std::initializer_list<double> vals);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  /// Rank-2 tensor copied from an Eigen matrix (any storage order).
  static Tensor fromMatrix(const Eigen::Ref<const Eigen::MatrixXd>& m);
  Eigen::MatrixXd toMatrix() const;

  const std::vector<Index>& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  bool isScalar() const { return data_.size() == 1; }
  bool sameShape(const Tensor& o) const { return shape_ == o.shape_; }

  /// Row/column extents; requires rank 2.
  Index rows() const;
  Index cols() const;

  double at(Index i) const { return data_[i]; }
  double& at(Index i) { return data_[i]; }
  double at(Index r, Index c) const { return data_[r * cols() + c]; }
  double& at(Index r, Index c) { return data_[r * cols() + c]; }
  double scalarValue() const;

  const Eigen::ArrayXd& data() const { return data_; }
  Eigen::ArrayXd& data() { return data_; }

 private:
  Tensor(std::vector<Index> shape, Eigen::ArrayXd data)
      : shape_(std::move(shape)), data_(std::move(data)) {}

  std::vector<Index> shape_;
  Eigen::ArrayXd data_;
};

std::string shapeString(const Tensor& t);

/// Elementwise binary ops. Operands must have identical shapes, except that
/// a size-1 operand broadcasts against any shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// Rank-2 matrix product with fixed left-to-right accumulation over the
/// contraction index.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor exp(const Tensor& a);
/// Natural log; throws DomainError if any element is <= 0.
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor neg(const Tensor& a);
/// Elementwise 1/x; throws DomainError if any element is exactly 0.
Tensor reciprocal(const Tensor& a);
Tensor abs(const Tensor& a);

/// Full reduction to a rank-0 scalar, summing flat elements left to right.
Tensor sum(const Tensor& a);
/// Rank-2 (m x k) -> (m x 1), each row summed left to right.
Tensor rowSum(const Tensor& a);

Tensor transpose(const Tensor& a);
/// Rank-2 column gather: (m x k) -> (m x idx.size()).
Tensor selectCols(const Tensor& a, const std::vector<Index>& idx);
/// Rank-2 column scatter into an (m x extent) zero matrix; adjoint of
/// selectCols. Indices must be distinct and within [0, extent).
Tensor scatterCols(const Tensor& a, const std::vector<Index>& idx, Index extent);
/// Size-n vector (rank 1 or 1 x n) -> n x n diagonal matrix.
Tensor diagEmbed(const Tensor& a);

}  // namespace nf
