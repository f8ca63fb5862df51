#include "nf/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nf/serialize.hpp"

namespace nf {
namespace {

using json = nlohmann::ordered_json;

std::vector<Index> parityIndices(Index dim, int parity) {
  std::vector<Index> out;
  for (Index i = 0; i < dim; ++i)
    if (i % 2 == parity) out.push_back(i);
  return out;
}

std::vector<Index> complementOf(Index dim, const std::vector<Index>& idx) {
  std::vector<bool> taken(static_cast<size_t>(dim), false);
  for (Index i : idx) taken[static_cast<size_t>(i)] = true;
  std::vector<Index> out;
  for (Index i = 0; i < dim; ++i)
    if (!taken[static_cast<size_t>(i)]) out.push_back(i);
  return out;
}

Tensor heNormal(Index rows, Index cols, Index fanIn, CounterRng& rng) {
  const double std = std::sqrt(2.0 / static_cast<double>(fanIn));
  Eigen::ArrayXd flat(rows * cols);
  for (Index i = 0; i < flat.size(); ++i) flat[i] = rng.nextNormal() * std;
  return Tensor::fromFlat({rows, cols}, std::move(flat));
}

}  // namespace

struct CouplingOps {
  template <class B, class E>
  static std::pair<typename E::Value, typename E::Value> conditioner(
      B& self, const E& e, typename E::Value xc, Index rows) {
    auto ones = e.constant(Tensor::ones({rows, 1}));
    auto h1 = e.relu(e.add(e.matmul(xc, e.param(&self.w1_)),
                           e.matmul(ones, e.param(&self.b1_))));
    auto h2 = e.relu(e.add(e.matmul(h1, e.param(&self.w2_)),
                           e.matmul(ones, e.param(&self.b2_))));
    auto out = e.add(e.matmul(h2, e.param(&self.w3_)),
                     e.matmul(ones, e.param(&self.b3_)));
    const Index m = static_cast<Index>(self.transIdx_.size());
    std::vector<Index> lsIdx(static_cast<size_t>(m));
    std::vector<Index> tIdx(static_cast<size_t>(m));
    std::iota(lsIdx.begin(), lsIdx.end(), Index{0});
    std::iota(tIdx.begin(), tIdx.end(), m);
    auto rawLs = e.selectCols(out, lsIdx);
    auto shift = e.selectCols(out, tIdx);
    auto quarter = e.constant(Tensor::scalar(0.25));
    auto four = e.constant(Tensor::scalar(4.0));
    auto logS = e.mul(e.tanh(e.mul(rawLs, quarter)), four);
    return {logS, shift};
  }

  template <class B, class E>
  static std::pair<typename E::Value, typename E::Value> fwd(
      B& self, const E& e, typename E::Value x, Index rows) {
    auto xc = e.selectCols(x, self.condIdx_);
    auto xt = e.selectCols(x, self.transIdx_);
    auto [logS, shift] = conditioner(self, e, xc, rows);
    auto zt = e.mul(e.sub(xt, shift), e.exp(e.neg(logS)));
    auto y = e.add(e.scatterCols(xc, self.condIdx_, self.dim_),
                   e.scatterCols(zt, self.transIdx_, self.dim_));
    auto ld = e.neg(e.rowSum(logS));
    return {y, ld};
  }

  template <class B, class E>
  static std::pair<typename E::Value, typename E::Value> inv(
      B& self, const E& e, typename E::Value y, Index rows) {
    auto zc = e.selectCols(y, self.condIdx_);
    auto zt = e.selectCols(y, self.transIdx_);
    auto [logS, shift] = conditioner(self, e, zc, rows);
    auto xt = e.add(e.mul(zt, e.exp(logS)), shift);
    auto x = e.add(e.scatterCols(zc, self.condIdx_, self.dim_),
                   e.scatterCols(xt, self.transIdx_, self.dim_));
    auto ld = e.rowSum(logS);
    return {x, ld};
  }
};

AffineCoupling::AffineCoupling(Index dim, Index hidden,
                               std::vector<Index> condIdx)
    : dim_(dim), hidden_(hidden), condIdx_(std::move(condIdx)) {
  if (dim_ < 2) throw ShapeError("affine_coupling: dim must be at least 2");
  if (hidden_ <= 0)
    throw ShapeError("affine_coupling: hidden width must be positive");
  if (condIdx_.empty())
    throw ShapeError("affine_coupling: conditioning set is empty");
  for (size_t i = 0; i < condIdx_.size(); ++i) {
    if (condIdx_[i] < 0 || condIdx_[i] >= dim_)
      throw ShapeError("affine_coupling: conditioning index out of range");
    if (i > 0 && condIdx_[i] <= condIdx_[i - 1])
      throw ShapeError(
          "affine_coupling: conditioning indices must be strictly increasing");
  }
  transIdx_ = complementOf(dim_, condIdx_);
  if (transIdx_.empty())
    throw ShapeError("affine_coupling: no coordinates left to transform");
}

AffineCoupling::AffineCoupling(Index dim, Index hidden, int parity,
                               CounterRng& rng)
    : AffineCoupling(dim, hidden, parityIndices(dim, parity)) {
  if (parity != 0 && parity != 1)
    throw ShapeError("affine_coupling: parity must be 0 or 1");
  const Index k = static_cast<Index>(condIdx_.size());
  const Index m = static_cast<Index>(transIdx_.size());
  w1_ = heNormal(k, hidden_, k, rng);
  b1_ = Tensor::zeros({1, hidden_});
  w2_ = heNormal(hidden_, hidden_, hidden_, rng);
  b2_ = Tensor::zeros({1, hidden_});
  w3_ = Tensor::zeros({hidden_, 2 * m});
  b3_ = Tensor::zeros({1, 2 * m});
}

AffineCoupling::AffineCoupling(Index dim, Index hidden,
                               std::vector<Index> condIdx, CounterRng& rng)
    : AffineCoupling(dim, hidden, std::move(condIdx)) {
  const Index k = static_cast<Index>(condIdx_.size());
  const Index m = static_cast<Index>(transIdx_.size());
  w1_ = heNormal(k, hidden_, k, rng);
  b1_ = Tensor::zeros({1, hidden_});
  w2_ = heNormal(hidden_, hidden_, hidden_, rng);
  b2_ = Tensor::zeros({1, hidden_});
  w3_ = Tensor::zeros({hidden_, 2 * m});
  b3_ = Tensor::zeros({1, 2 * m});
}

EagerStep AffineCoupling::forwardBatch(const Tensor& x) const {
  checkBatch(x, "affine_coupling");
  EagerExec e;
  auto [y, ld] = CouplingOps::fwd(*this, e, x, x.rows());
  return {y, ld};
}

EagerStep AffineCoupling::inverseBatch(const Tensor& y) const {
  checkBatch(y, "affine_coupling");
  EagerExec e;
  auto [x, ld] = CouplingOps::inv(*this, e, y, y.rows());
  return {x, ld};
}

TapeStep AffineCoupling::forwardOnTape(Tape& t, NodeId x,
                                       std::vector<ParamBinding>* bindings) {
  TapeExec e{&t, bindings};
  auto [y, ld] = CouplingOps::fwd(*this, e, x, e.rowsOf(x));
  return {y, ld};
}

TapeStep AffineCoupling::inverseOnTape(Tape& t, NodeId y,
                                       std::vector<ParamBinding>* bindings) {
  TapeExec e{&t, bindings};
  auto [x, ld] = CouplingOps::inv(*this, e, y, e.rowsOf(y));
  return {x, ld};
}

std::vector<ParamRef> AffineCoupling::parameters() {
  return {{"w1", &w1_}, {"b1", &b1_}, {"w2", &w2_},
          {"b2", &b2_}, {"w3", &w3_}, {"b3", &b3_}};
}

nlohmann::ordered_json AffineCoupling::toJson() const {
  json j;
  j["kind"] = kind();
  j["dim"] = dim_;
  j["hidden"] = hidden_;
  j["cond_indices"] = condIdx_;
  json p;
  p["w1"] = tensorToJson(w1_);
  p["b1"] = tensorToJson(b1_);
  p["w2"] = tensorToJson(w2_);
  p["b2"] = tensorToJson(b2_);
  p["w3"] = tensorToJson(w3_);
  p["b3"] = tensorToJson(b3_);
  j["params"] = std::move(p);
  return j;
}

std::unique_ptr<AffineCoupling> AffineCoupling::fromJson(
    const nlohmann::ordered_json& j) {
  std::unique_ptr<AffineCoupling> c;
  try {
    auto cond = j.at("cond_indices").get<std::vector<Index>>();
    c.reset(new AffineCoupling(j.at("dim").get<Index>(),
                               j.at("hidden").get<Index>(), std::move(cond)));
    const auto& p = j.at("params");
    c->w1_ = tensorFromJson(p.at("w1"));
    c->b1_ = tensorFromJson(p.at("b1"));
    c->w2_ = tensorFromJson(p.at("w2"));
    c->b2_ = tensorFromJson(p.at("b2"));
    c->w3_ = tensorFromJson(p.at("w3"));
    c->b3_ = tensorFromJson(p.at("b3"));
  } catch (const json::exception& ex) {
    throw DataError("affine_coupling json: " + std::string(ex.what()));
  }
  const Index k = static_cast<Index>(c->condIdx_.size());
  const Index m = static_cast<Index>(c->transIdx_.size());
  const Index h = c->hidden_;
  auto want = [](const Tensor& t, Index r, Index cc) {
    return t.rank() == 2 && t.rows() == r && t.cols() == cc;
  };
  if (!want(c->w1_, k, h) || !want(c->b1_, 1, h) || !want(c->w2_, h, h) ||
      !want(c->b2_, 1, h) || !want(c->w3_, h, 2 * m) ||
      !want(c->b3_, 1, 2 * m))
    throw DataError("affine_coupling json: parameter shape mismatch");
  return c;
}

}  // namespace nf
