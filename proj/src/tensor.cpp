#include "nf/tensor.hpp"

#include <cstdio>
#include <string>

namespace nf {
namespace {

Index shapeProduct(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index e : shape) {
    if (e <= 0) throw ShapeError("tensor extents must be positive");
    n *= e;
  }
  return n;
}

void requireFinite(const Tensor& t, const char* op) {
  if (!t.data().allFinite())
    throw NumericError(std::string(op) + ": non-finite result");
}

void requireRank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw ShapeError(std::string(op) + ": expected rank 2, got " + shapeString(t));
}

// Shared driver for elementwise binaries with scalar broadcast.
template <class F>
Tensor binary(const Tensor& a, const Tensor& b, F f, const char* op) {
  Tensor out;
  if (a.sameShape(b)) {
    out = Tensor::fromFlat(a.shape(), f(a.data(), b.data()));
  } else if (b.isScalar() && (!a.isScalar() || a.rank() >= b.rank())) {
    // When both operands have one element the higher-rank shape carries,
    // so a 1x1 batch never collapses to a bare scalar.
    out = Tensor::fromFlat(a.shape(), f(a.data(), b.at(0)));
  } else if (a.isScalar()) {
    out = Tensor::fromFlat(b.shape(), f(a.at(0), b.data()));
  } else {
    throw ShapeError(std::string(op) + ": shape mismatch " + shapeString(a) +
                     " vs " + shapeString(b));
  }
  requireFinite(out, op);
  return out;
}

}  // namespace

Tensor Tensor::scalar(double v) {
  Eigen::ArrayXd d(1);
  d[0] = v;
  return fromFlat({}, std::move(d));
}

Tensor Tensor::zeros(std::vector<Index> shape) {
  Index n = shapeProduct(shape);
  return Tensor(std::move(shape), Eigen::ArrayXd::Zero(n));
}

Tensor Tensor::ones(std::vector<Index> shape) {
  Index n = shapeProduct(shape);
  return Tensor(std::move(shape), Eigen::ArrayXd::Ones(n));
}

Tensor Tensor::fromFlat(std::vector<Index> shape, Eigen::ArrayXd data) {
  if (shapeProduct(shape) != data.size())
    throw ShapeError("tensor data length does not match shape");
  if (!data.allFinite()) throw NumericError("tensor: non-finite element");
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> vals) {
  Eigen::ArrayXd d(static_cast<Index>(vals.size()));
  Index i = 0;
  for (double v : vals) d[i++] = v;
  return fromFlat({static_cast<Index>(vals.size())}, std::move(d));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const Index r = static_cast<Index>(rows.size());
  if (r == 0) throw ShapeError("matrix literal must be non-empty");
  const Index c = static_cast<Index>(rows.begin()->size());
  Eigen::ArrayXd d(r * c);
  Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != c)
      throw ShapeError("matrix literal rows differ in length");
    for (double v : row) d[i++] = v;
  }
  return fromFlat({r, c}, std::move(d));
}

Tensor Tensor::fromMatrix(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  Eigen::ArrayXd d(m.size());
  Index i = 0;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) d[i++] = m(r, c);
  return fromFlat({m.rows(), m.cols()}, std::move(d));
}

Eigen::MatrixXd Tensor::toMatrix() const {
  requireRank2(*this, "toMatrix");
  Eigen::MatrixXd m(rows(), cols());
  Index i = 0;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = data_[i++];
  return m;
}

Index Tensor::rows() const {
  requireRank2(*this, "rows");
  return shape_[0];
}

Index Tensor::cols() const {
  requireRank2(*this, "cols");
  return shape_[1];
}

double Tensor::scalarValue() const {
  if (!isScalar()) throw ShapeError("scalarValue: tensor has size " +
                                    std::to_string(size()));
  return data_[0];
}

std::string shapeString(const Tensor& t) {
  std::string s = "(";
  for (Index i = 0; i < t.rank(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.shape()[i]);
  }
  return s + ")";
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(a, b, [](const auto& x, const auto& y) { return x + y; }, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(a, b, [](const auto& x, const auto& y) { return x - y; }, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(a, b, [](const auto& x, const auto& y) { return x * y; }, "mul");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  requireRank2(a, "matmul");
  requireRank2(b, "matmul");
  const Index m = a.shape()[0], k = a.shape()[1];
  const Index k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2)
    throw ShapeError("matmul: inner dimensions " + shapeString(a) + " vs " +
                     shapeString(b));
  Tensor out = Tensor::zeros({m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = out.data().data();
  for (Index i = 0; i < m; ++i) {
    double* ci = pc + i * n;
    for (Index kk = 0; kk < k; ++kk) {
      const double av = pa[i * k + kk];
      const double* bk = pb + kk * n;
      for (Index j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
  requireFinite(out, "matmul");
  return out;
}

Tensor exp(const Tensor& a) {
  Tensor out = Tensor::fromFlat(a.shape(), a.data().exp());
  requireFinite(out, "exp");
  return out;
}

Tensor log(const Tensor& a) {
  if ((a.data() <= 0.0).any())
    throw DomainError("log: non-positive argument");
  return Tensor::fromFlat(a.shape(), a.data().log());
}

Tensor tanh(const Tensor& a) {
  return Tensor::fromFlat(a.shape(), a.data().tanh());
}

Tensor relu(const Tensor& a) {
  return Tensor::fromFlat(a.shape(), a.data().max(0.0));
}

Tensor neg(const Tensor& a) {
  return Tensor::fromFlat(a.shape(), -a.data());
}

Tensor reciprocal(const Tensor& a) {
  if ((a.data() == 0.0).any()) throw DomainError("reciprocal: zero argument");
  Tensor out = Tensor::fromFlat(a.shape(), a.data().inverse());
  requireFinite(out, "reciprocal");
  return out;
}

Tensor abs(const Tensor& a) {
  return Tensor::fromFlat(a.shape(), a.data().abs());
}

Tensor sum(const Tensor& a) {
  const double* p = a.data().data();
  double acc = 0.0;
  for (Index i = 0; i < a.size(); ++i) acc += p[i];
  Tensor out = Tensor::scalar(acc);
  requireFinite(out, "sum");
  return out;
}

Tensor rowSum(const Tensor& a) {
  requireRank2(a, "rowSum");
  const Index m = a.shape()[0], k = a.shape()[1];
  Tensor out = Tensor::zeros({m, 1});
  const double* p = a.data().data();
  for (Index i = 0; i < m; ++i) {
    double acc = 0.0;
    for (Index j = 0; j < k; ++j) acc += p[i * k + j];
    out.at(i) = acc;
  }
  requireFinite(out, "rowSum");
  return out;
}

Tensor transpose(const Tensor& a) {
  requireRank2(a, "transpose");
  const Index m = a.shape()[0], n = a.shape()[1];
  Tensor out = Tensor::zeros({n, m});
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor selectCols(const Tensor& a, const std::vector<Index>& idx) {
  requireRank2(a, "selectCols");
  const Index m = a.shape()[0], k = a.shape()[1];
  for (Index j : idx)
    if (j < 0 || j >= k) throw ShapeError("selectCols: index out of range");
  const Index w = static_cast<Index>(idx.size());
  if (w == 0) throw ShapeError("selectCols: empty index list");
  Tensor out = Tensor::zeros({m, w});
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < w; ++j) out.at(i, j) = a.at(i, idx[j]);
  return out;
}

Tensor scatterCols(const Tensor& a, const std::vector<Index>& idx, Index extent) {
  requireRank2(a, "scatterCols");
  const Index m = a.shape()[0], w = a.shape()[1];
  if (w != static_cast<Index>(idx.size()))
    throw ShapeError("scatterCols: index count does not match columns");
  std::vector<bool> seen(static_cast<size_t>(extent), false);
  for (Index j : idx) {
    if (j < 0 || j >= extent) throw ShapeError("scatterCols: index out of range");
    if (seen[static_cast<size_t>(j)])
      throw ShapeError("scatterCols: duplicate index");
    seen[static_cast<size_t>(j)] = true;
  }
  Tensor out = Tensor::zeros({m, extent});
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < w; ++j) out.at(i, idx[j]) = a.at(i, j);
  return out;
}

Tensor diagEmbed(const Tensor& a) {
  const bool vecLike = a.rank() == 1 || (a.rank() == 2 && a.shape()[0] == 1);
  if (!vecLike)
    throw ShapeError("diagEmbed: expected a vector, got " + shapeString(a));
  const Index n = a.size();
  Tensor out = Tensor::zeros({n, n});
  for (Index i = 0; i < n; ++i) out.at(i, i) = a.at(i);
  return out;
}

}  // namespace nf
