#include "nf/density.hpp"

#include <cmath>
#include <limits>

namespace nf {
namespace {

const double kLog2Pi = std::log(2.0 * 3.14159265358979323846);
const double kSupportTol = 1e-9;
const Index kEvalChunk = 4096;

void checkRows(const Tensor& z, Index dim, const char* who) {
  if (z.rank() != 2 || z.cols() != dim)
    throw ShapeError(std::string(who) + ": expected rows of width " +
                     std::to_string(dim) + ", got " + shapeString(z));
}

}  // namespace

DiagonalStandardNormal::DiagonalStandardNormal(Index dim) : dim_(dim) {
  if (dim <= 0)
    throw ShapeError("diagonal_standard_normal: dim must be positive");
}

Eigen::VectorXd DiagonalStandardNormal::logProbRows(const Tensor& z) const {
  checkRows(z, dim_, "diagonal_standard_normal");
  const double c = -0.5 * static_cast<double>(dim_) * kLog2Pi;
  Eigen::VectorXd out(z.rows());
  for (Index r = 0; r < z.rows(); ++r) {
    double q = 0.0;
    for (Index j = 0; j < dim_; ++j) q += z.at(r, j) * z.at(r, j);
    out[r] = c - 0.5 * q;
  }
  return out;
}

NodeId DiagonalStandardNormal::logProbTotalOnTape(Tape& t, NodeId z) const {
  const Tensor& zv = t.value(z);
  checkRows(zv, dim_, "diagonal_standard_normal");
  const double c = -0.5 * static_cast<double>(dim_) * kLog2Pi;
  NodeId constant =
      t.constant(Tensor::scalar(static_cast<double>(zv.rows()) * c));
  NodeId half = t.constant(Tensor::scalar(0.5));
  return t.sub(constant, t.mul(half, t.sum(t.mul(z, z))));
}

UniformInterval::UniformInterval(double lo, double hi) : lo_(lo), hi_(hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw DomainError("uniform_interval: need finite lo < hi");
}

Eigen::VectorXd UniformInterval::logProbRows(const Tensor& z) const {
  checkRows(z, 1, "uniform_interval");
  const double inside = -std::log(hi_ - lo_);
  Eigen::VectorXd out(z.rows());
  for (Index r = 0; r < z.rows(); ++r) {
    const double v = z.at(r, 0);
    out[r] = (v >= lo_ - kSupportTol && v <= hi_ + kSupportTol)
                 ? inside
                 : -std::numeric_limits<double>::infinity();
  }
  return out;
}

FlowModel::FlowModel(std::unique_ptr<BaseDistribution> base, Chain chain)
    : base_(std::move(base)), chain_(std::move(chain)) {
  if (!base_) throw ShapeError("flow_model: missing base distribution");
  if (chain_.dim() != 0 && chain_.dim() != base_->dim())
    throw ShapeError("flow_model: chain dim " + std::to_string(chain_.dim()) +
                     " does not match base dim " +
                     std::to_string(base_->dim()));
}

Eigen::VectorXd FlowModel::logProbBatch(const Tensor& x) const {
  EagerStep s = chain_.forwardBatch(x);
  Eigen::VectorXd lp = base_->logProbRows(s.y);
  for (Index r = 0; r < x.rows(); ++r) lp[r] += s.logDet.at(r, 0);
  return lp;
}

double FlowModel::logProb(const Eigen::VectorXd& x) const {
  return logProbBatch(Tensor::fromMatrix(x.transpose()))[0];
}

Tensor FlowModel::sample(Index count, std::uint64_t seed) const {
  if (count <= 0) throw DomainError("sample: count must be positive");
  CounterRng rng(seed);
  Tensor z = Tensor::zeros({count, dim()});
  for (Index i = 0; i < z.size(); ++i) z.at(i) = rng.nextNormal();
  return chain_.inverseBatch(z).y;
}

double FlowModel::gridIntegral(
    const std::vector<std::pair<double, double>>& box, double step) const {
  const Index d = dim();
  if (d > 2) throw ShapeError("grid integral: supported for dim <= 2 only");
  if (!(step > 0.0) || !std::isfinite(step))
    throw DomainError("grid integral: step must be positive");
  if (static_cast<Index>(box.size()) != d)
    throw ShapeError("grid integral: box rank does not match dim");

  std::vector<Index> cells(box.size());
  std::vector<double> h(box.size());
  for (size_t k = 0; k < box.size(); ++k) {
    const auto [lo, hi] = box[k];
    if (!(lo < hi)) throw DomainError("grid integral: need lo < hi");
    cells[k] = std::max<Index>(1, std::llround((hi - lo) / step));
    h[k] = (hi - lo) / static_cast<double>(cells[k]);
  }

  const Index total = d == 1 ? cells[0] : cells[0] * cells[1];
  const double cellVolume = d == 1 ? h[0] : h[0] * h[1];
  double acc = 0.0;
  for (Index begin = 0; begin < total; begin += kEvalChunk) {
    const Index n = std::min(kEvalChunk, total - begin);
    Tensor pts = Tensor::zeros({n, d});
    for (Index i = 0; i < n; ++i) {
      const Index flat = begin + i;
      if (d == 1) {
        pts.at(i, 0) = box[0].first + (static_cast<double>(flat) + 0.5) * h[0];
      } else {
        const Index r = flat / cells[1], c = flat % cells[1];
        pts.at(i, 0) = box[0].first + (static_cast<double>(r) + 0.5) * h[0];
        pts.at(i, 1) = box[1].first + (static_cast<double>(c) + 0.5) * h[1];
      }
    }
    Eigen::VectorXd lp = logProbBatch(pts);
    for (Index i = 0; i < n; ++i) acc += std::exp(lp[i]);
  }
  return acc * cellVolume;
}

}  // namespace nf
