#pragma once

// Reference implementations used only by tests. Everything here is written
// independently of the library's numeric paths: naive summation, explicit
// cofactor expansions, and finite differences.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "nf/tape.hpp"
#include "nf/tensor.hpp"

namespace oracles {

// Naive per-entry matrix product.
inline nf::Tensor matmulNaive(const nf::Tensor& a, const nf::Tensor& b) {
  const nf::Index m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  nf::Tensor c = nf::Tensor::zeros({m, n});
  for (nf::Index i = 0; i < m; ++i)
    for (nf::Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (nf::Index t = 0; t < k; ++t) acc += a.at(i, t) * b.at(t, j);
      c.at(i, j) = acc;
    }
  return c;
}

// Determinant by cofactor expansion along the first row.
inline double cofactorDet(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (n == 1) return m(0, 0);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::MatrixXd minor(n - 1, n - 1);
    for (Eigen::Index r = 1; r < n; ++r) {
      Eigen::Index cc = 0;
      for (Eigen::Index c = 0; c < n; ++c) {
        if (c == j) continue;
        minor(r - 1, cc++) = m(r, c);
      }
    }
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    acc += sign * m(0, j) * cofactorDet(minor);
  }
  return acc;
}

// Central finite-difference Jacobian of a vector map.
inline Eigen::MatrixXd fdJacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-5) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd jac(f(x).size(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

// log|det J| of a vector map via finite differences.
inline double fdLogAbsDetJacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::MatrixXd jac = fdJacobian(f, x, h);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
  double logDet = 0.0;
  for (Eigen::Index i = 0; i < jac.rows(); ++i)
    logDet += std::log(std::abs(lu.matrixLU()(i, i)));
  return logDet;
}

// Builds a scalar loss from parameter tensors; used for gradient checks.
using LossBuilder =
    std::function<nf::NodeId(nf::Tape&, const std::vector<nf::NodeId>&)>;

inline double evalLoss(const LossBuilder& build,
                       const std::vector<nf::Tensor>& inputs) {
  nf::Tape t;
  std::vector<nf::NodeId> ids;
  ids.reserve(inputs.size());
  for (const auto& in : inputs) ids.push_back(t.parameter(in));
  return t.value(build(t, ids)).scalarValue();
}

struct GradCheckResult {
  double maxRelErr = 0.0;
  double worstAnalytic = 0.0;
  double worstNumeric = 0.0;
};

// Central finite differences against tape gradients for every element of
// every input. Relative error uses a unit floor so near-zero gradients are
// compared absolutely.
inline GradCheckResult checkGradients(const LossBuilder& build,
                                      const std::vector<nf::Tensor>& inputs,
                                      double h = 1e-6) {
  nf::Tape t;
  std::vector<nf::NodeId> ids;
  for (const auto& in : inputs) ids.push_back(t.parameter(in));
  nf::Tape::Gradients grads = t.backward(build(t, ids));

  GradCheckResult res;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (nf::Index j = 0; j < inputs[i].size(); ++j) {
      std::vector<nf::Tensor> plus = inputs, minus = inputs;
      plus[i].at(j) += h;
      minus[i].at(j) -= h;
      const double fd =
          (evalLoss(build, plus) - evalLoss(build, minus)) / (2.0 * h);
      const double ad = grads.at(ids[i]).at(j);
      const double rel = std::abs(ad - fd) / std::max(1.0, std::abs(fd));
      if (rel > res.maxRelErr) {
        res.maxRelErr = rel;
        res.worstAnalytic = ad;
        res.worstNumeric = fd;
      }
    }
  }
  return res;
}

// Deterministic test-side value generator (independent of the library rng).
class TestRng {
 public:
  explicit TestRng(unsigned seed) : eng_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  // Value in [-2, 2] with |x| >= margin; safe around kinks and domain edges.
  double awayFromZero(double margin) {
    double v = uniform(margin, 2.0);
    return uniform(0.0, 1.0) < 0.5 ? -v : v;
  }
  nf::Tensor tensor(std::vector<nf::Index> shape, double lo = -2.0,
                    double hi = 2.0) {
    nf::Tensor t = nf::Tensor::zeros(shape);
    for (nf::Index i = 0; i < t.size(); ++i) t.at(i) = uniform(lo, hi);
    return t;
  }
  nf::Tensor tensorAwayFromZero(std::vector<nf::Index> shape, double margin) {
    nf::Tensor t = nf::Tensor::zeros(shape);
    for (nf::Index i = 0; i < t.size(); ++i) t.at(i) = awayFromZero(margin);
    return t;
  }
  nf::Tensor tensorPositive(std::vector<nf::Index> shape, double lo = 0.05,
                            double hi = 2.0) {
    return tensor(shape, lo, hi);
  }

 private:
  std::mt19937 eng_;
};

inline double sampleMean(const Eigen::VectorXd& v) { return v.mean(); }

inline double sampleStd(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / (v.size() - 1));
}

inline double sampleCorrelation(const Eigen::VectorXd& a,
                                const Eigen::VectorXd& b) {
  const double ma = a.mean(), mb = b.mean();
  const double cov = ((a.array() - ma) * (b.array() - mb)).sum();
  const double va = (a.array() - ma).square().sum();
  const double vb = (b.array() - mb).square().sum();
  return cov / std::sqrt(va * vb);
}

}  // namespace oracles
