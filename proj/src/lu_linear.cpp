#include "nf/lu_linear.hpp"

#include <algorithm>
#include <cmath>

#include "nf/serialize.hpp"

namespace nf {
namespace {

using json = nlohmann::ordered_json;

Tensor strictLowerMask(Index n) {
  Tensor m = Tensor::zeros({n, n});
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < i; ++j) m.at(i, j) = 1.0;
  return m;
}

Tensor strictUpperMask(Index n) {
  Tensor m = Tensor::zeros({n, n});
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) m.at(i, j) = 1.0;
  return m;
}

Tensor identityTensor(Index n) {
  Tensor m = Tensor::zeros({n, n});
  for (Index i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

}  // namespace

struct LuOps {
  template <class B, class E>
  static std::pair<typename E::Value, typename E::Value> fwd(
      B& self, const E& e, typename E::Value x, Index rows) {
    auto logDiag = e.param(&self.logDiag_);
    auto lmat = e.add(e.mul(e.param(&self.lower_), e.constant(self.lmask_)),
                      e.constant(self.eye_));
    auto umat =
        e.add(e.mul(e.param(&self.upper_), e.constant(self.umask_)),
              e.diagEmbed(e.mul(e.constant(self.diagSign_), e.exp(logDiag))));
    auto y = e.matmul(e.matmul(e.matmul(x, e.transpose(umat)),
                               e.transpose(lmat)),
                      e.constant(self.pmT_));
    auto ld = e.mul(e.constant(Tensor::ones({rows, 1})), e.sum(logDiag));
    return {y, ld};
  }
};

LULinear::LULinear(Index dim) : dim_(dim) {
  if (dim <= 0) throw ShapeError("lu_linear: dim must be positive");
  perm_.resize(static_cast<size_t>(dim));
  for (Index i = 0; i < dim; ++i) perm_[static_cast<size_t>(i)] = i;
  pm_ = identityTensor(dim);
  pmT_ = identityTensor(dim);
  eye_ = identityTensor(dim);
  lmask_ = strictLowerMask(dim);
  umask_ = strictUpperMask(dim);
  diagSign_ = Tensor::ones({1, dim});
  lower_ = Tensor::zeros({dim, dim});
  upper_ = Tensor::zeros({dim, dim});
  logDiag_ = Tensor::zeros({1, dim});
}

std::unique_ptr<LULinear> LULinear::identity(Index dim) {
  return std::unique_ptr<LULinear>(new LULinear(dim));
}

std::unique_ptr<LULinear> LULinear::randomOrthogonal(Index dim,
                                                     CounterRng& rng) {
  auto out = std::unique_ptr<LULinear>(new LULinear(dim));
  Eigen::MatrixXd a(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) a(i, j) = rng.nextNormal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
  for (Index j = 0; j < dim; ++j)
    if (qr.matrixQR()(j, j) < 0.0) q.col(j) = -q.col(j);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(q);
  Eigen::MatrixXd pd =
      lu.permutationP() * Eigen::MatrixXd::Identity(dim, dim);
  Eigen::MatrixXd pOurs = pd.transpose();  // q = pOurs * L * U
  const Eigen::MatrixXd& f = lu.matrixLU();

  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j)
      if (pOurs(i, j) == 1.0) out->perm_[static_cast<size_t>(i)] = j;
  out->pm_ = Tensor::fromMatrix(pOurs);
  out->pmT_ = Tensor::fromMatrix(pOurs.transpose());
  for (Index i = 0; i < dim; ++i) {
    for (Index j = 0; j < i; ++j) out->lower_.at(i, j) = f(i, j);
    for (Index j = i + 1; j < dim; ++j) out->upper_.at(i, j) = f(i, j);
    const double d = f(i, i);
    out->diagSign_.at(0, i) = d >= 0.0 ? 1.0 : -1.0;
    out->logDiag_.at(0, i) = std::log(std::abs(d));
  }
  return out;
}

EagerStep LULinear::forwardBatch(const Tensor& x) const {
  checkBatch(x, "lu_linear");
  EagerExec e;
  auto [y, ld] = LuOps::fwd(*this, e, x, x.rows());
  return {y, ld};
}

EagerStep LULinear::inverseBatch(const Tensor& y) const {
  checkBatch(y, "lu_linear");
  Eigen::MatrixXd lmat = Eigen::MatrixXd::Identity(dim_, dim_);
  Eigen::MatrixXd umat = Eigen::MatrixXd::Zero(dim_, dim_);
  for (Index i = 0; i < dim_; ++i) {
    for (Index j = 0; j < i; ++j) lmat(i, j) = lower_.at(i, j);
    for (Index j = i + 1; j < dim_; ++j) umat(i, j) = upper_.at(i, j);
    umat(i, i) = diagSign_.at(0, i) * std::exp(logDiag_.at(0, i));
  }
  Eigen::MatrixXd v = y.toMatrix() * pm_.toMatrix();
  Eigen::MatrixXd w =
      lmat.triangularView<Eigen::UnitLower>().solve(v.transpose());
  Eigen::MatrixXd x = umat.triangularView<Eigen::Upper>().solve(w).transpose();
  if (!x.allFinite()) throw NumericError("lu_linear: non-finite inverse");
  const double s = sum(logDiag_).at(0);
  Tensor ld = mul(Tensor::ones({y.rows(), 1}), Tensor::scalar(-s));
  return {Tensor::fromMatrix(x), ld};
}

TapeStep LULinear::forwardOnTape(Tape& t, NodeId x,
                                 std::vector<ParamBinding>* bindings) {
  TapeExec e{&t, bindings};
  auto [y, ld] = LuOps::fwd(*this, e, x, e.rowsOf(x));
  return {y, ld};
}

TapeStep LULinear::inverseOnTape(Tape&, NodeId, std::vector<ParamBinding>*) {
  throw std::logic_error("lu_linear: inverse is not recordable on the tape");
}

std::vector<ParamRef> LULinear::parameters() {
  return {{"lower", &lower_}, {"upper", &upper_}, {"log_diag", &logDiag_}};
}

nlohmann::ordered_json LULinear::toJson() const {
  json j;
  j["kind"] = kind();
  j["dim"] = dim_;
  j["perm"] = perm_;
  std::vector<int> signs(static_cast<size_t>(dim_));
  for (Index i = 0; i < dim_; ++i)
    signs[static_cast<size_t>(i)] = diagSign_.at(0, i) >= 0.0 ? 1 : -1;
  j["diag_sign"] = signs;
  json p;
  p["lower"] = tensorToJson(lower_);
  p["upper"] = tensorToJson(upper_);
  p["log_diag"] = tensorToJson(logDiag_);
  j["params"] = std::move(p);
  return j;
}

std::unique_ptr<LULinear> LULinear::fromJson(const nlohmann::ordered_json& j) {
  std::unique_ptr<LULinear> out;
  std::vector<Index> perm;
  std::vector<int> signs;
  try {
    out.reset(new LULinear(j.at("dim").get<Index>()));
    perm = j.at("perm").get<std::vector<Index>>();
    signs = j.at("diag_sign").get<std::vector<int>>();
    const auto& p = j.at("params");
    out->lower_ = tensorFromJson(p.at("lower"));
    out->upper_ = tensorFromJson(p.at("upper"));
    out->logDiag_ = tensorFromJson(p.at("log_diag"));
  } catch (const json::exception& ex) {
    throw DataError("lu_linear json: " + std::string(ex.what()));
  }
  const Index n = out->dim_;
  if (static_cast<Index>(perm.size()) != n ||
      static_cast<Index>(signs.size()) != n)
    throw DataError("lu_linear json: perm/diag_sign length mismatch");
  std::vector<bool> seen(static_cast<size_t>(n), false);
  for (Index i = 0; i < n; ++i) {
    const Index p = perm[static_cast<size_t>(i)];
    if (p < 0 || p >= n || seen[static_cast<size_t>(p)])
      throw DataError("lu_linear json: perm is not a permutation");
    seen[static_cast<size_t>(p)] = true;
    if (signs[static_cast<size_t>(i)] != 1 && signs[static_cast<size_t>(i)] != -1)
      throw DataError("lu_linear json: diag_sign entries must be +-1");
  }
  auto want = [n](const Tensor& t, Index r, Index c) {
    (void)n;
    return t.rank() == 2 && t.rows() == r && t.cols() == c;
  };
  if (!want(out->lower_, n, n) || !want(out->upper_, n, n) ||
      !want(out->logDiag_, 1, n))
    throw DataError("lu_linear json: parameter shape mismatch");
  out->perm_ = perm;
  out->pm_ = Tensor::zeros({n, n});
  for (Index i = 0; i < n; ++i)
    out->pm_.at(i, perm[static_cast<size_t>(i)]) = 1.0;
  out->pmT_ = transpose(out->pm_);
  for (Index i = 0; i < n; ++i)
    out->diagSign_.at(0, i) = static_cast<double>(signs[static_cast<size_t>(i)]);
  return out;
}

Eigen::MatrixXd LULinear::denseMatrix() const {
  Eigen::MatrixXd lmat = Eigen::MatrixXd::Identity(dim_, dim_);
  Eigen::MatrixXd umat = Eigen::MatrixXd::Zero(dim_, dim_);
  for (Index i = 0; i < dim_; ++i) {
    for (Index j = 0; j < i; ++j) lmat(i, j) = lower_.at(i, j);
    for (Index j = i + 1; j < dim_; ++j) umat(i, j) = upper_.at(i, j);
    umat(i, i) = diagSign_.at(0, i) * std::exp(logDiag_.at(0, i));
  }
  return pm_.toMatrix() * lmat * umat;
}

}  // namespace nf
