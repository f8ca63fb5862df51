#include "nf/bijector.hpp"

#include <cmath>

#include "nf/coupling.hpp"
#include "nf/lu_linear.hpp"
#include "nf/serialize.hpp"

namespace nf {
namespace {

using json = nlohmann::ordered_json;

// min/max against scalar bounds expressed through relu so the same code
// runs on either executor.
template <class E>
typename E::Value clampScalar(const E& e, typename E::Value v, double lo,
                              double hi) {
  auto cLo = e.constant(Tensor::scalar(lo));
  auto cHi = e.constant(Tensor::scalar(hi));
  auto floored = e.add(cLo, e.relu(e.sub(v, cLo)));
  return e.sub(cHi, e.relu(e.sub(cHi, floored)));
}

template <class E>
typename E::Value constRows(const E& e, Index rows, typename E::Value scalar) {
  return e.mul(e.constant(Tensor::ones({rows, 1})), scalar);
}

// --- NonlinearShear2D ------------------------------------------------------

template <class E>
auto shearForward(const E& e, typename E::Value x, double divisor, Index rows) {
  (void)rows;
  auto x1 = e.selectCols(x, {0});
  auto x2 = e.selectCols(x, {1});
  auto f = e.add(e.constant(Tensor::scalar(1.0)),
                 e.mul(x2, e.constant(Tensor::scalar(1.0 / divisor))));
  auto ld = e.log(f);  // enforces the x2 > -divisor domain
  auto y1 = e.mul(x1, f);
  auto y = e.add(e.scatterCols(y1, {0}, 2), e.scatterCols(x2, {1}, 2));
  return std::make_pair(y, ld);
}

template <class E>
auto shearInverse(const E& e, typename E::Value y, double divisor, Index rows) {
  (void)rows;
  auto y1 = e.selectCols(y, {0});
  auto y2 = e.selectCols(y, {1});
  auto f = e.add(e.constant(Tensor::scalar(1.0)),
                 e.mul(y2, e.constant(Tensor::scalar(1.0 / divisor))));
  auto ld = e.neg(e.log(f));  // domain check before the division below
  auto x1 = e.mul(y1, e.reciprocal(f));
  auto x = e.add(e.scatterCols(x1, {0}, 2), e.scatterCols(y2, {1}, 2));
  return std::make_pair(x, ld);
}

// --- SquareScale1D ---------------------------------------------------------

template <class E>
auto squareForward(const E& e, typename E::Value x, double c, Index rows) {
  (void)rows;
  // dy/dx = 2 c x; the log enforces x > 0.
  auto ld = e.log(e.mul(x, e.constant(Tensor::scalar(2.0 * c))));
  auto y = e.mul(e.mul(x, x), e.constant(Tensor::scalar(c)));
  return std::make_pair(y, ld);
}

template <class E>
auto squareInverse(const E& e, typename E::Value y, double c, Index rows) {
  (void)rows;
  // x = sqrt(y / c), written as exp(log/2) so the log enforces y > 0.
  auto x = e.exp(e.mul(e.log(e.mul(y, e.constant(Tensor::scalar(1.0 / c)))),
                       e.constant(Tensor::scalar(0.5))));
  auto ld = e.neg(e.log(e.mul(x, e.constant(Tensor::scalar(2.0 * c)))));
  return std::make_pair(x, ld);
}

// --- LogitSquash ------------------------------------------------------------

template <class E>
auto squashForward(const E& e, typename E::Value x, double eps, Index rows) {
  (void)rows;
  auto xp = e.add(e.constant(Tensor::scalar(eps)),
                  e.mul(x, e.constant(Tensor::scalar(1.0 - 2.0 * eps))));
  auto lxp = e.log(xp);  // domain: x' in (0, 1)
  auto lom = e.log(e.sub(e.constant(Tensor::scalar(1.0)), xp));
  auto y = e.sub(lxp, lom);
  auto ldElem = e.sub(
      e.sub(e.constant(Tensor::scalar(std::log(1.0 - 2.0 * eps))), lxp), lom);
  return std::make_pair(y, e.rowSum(ldElem));
}

template <class E>
auto squashInverse(const E& e, typename E::Value y, double eps, Index rows) {
  (void)rows;
  // Stable sigmoid via tanh; saturated tails are clamped one step inside the
  // open interval so far-out latents remain mappable.
  auto half = e.constant(Tensor::scalar(0.5));
  auto xp = e.add(half, e.mul(e.tanh(e.mul(y, half)), half));
  xp = clampScalar(e, xp, 1e-15, 1.0 - 1e-15);
  auto x = e.mul(e.sub(xp, e.constant(Tensor::scalar(eps))),
                 e.constant(Tensor::scalar(1.0 / (1.0 - 2.0 * eps))));
  auto lxp = e.log(xp);
  auto lom = e.log(e.sub(e.constant(Tensor::scalar(1.0)), xp));
  auto ldElem = e.sub(
      e.add(lxp, lom),
      e.constant(Tensor::scalar(std::log(1.0 - 2.0 * eps))));
  return std::make_pair(x, e.rowSum(ldElem));
}

}  // namespace

// --- Bijector base ----------------------------------------------------------

void Bijector::checkBatch(const Tensor& b, const char* who) const {
  if (b.rank() != 2)
    throw ShapeError(std::string(who) + ": batch must be rank 2");
  const Index d = dim();
  if (d != 0 && b.cols() != d)
    throw ShapeError(std::string(who) + ": batch width " +
                     std::to_string(b.cols()) + " does not match dim " +
                     std::to_string(d));
}

std::pair<Eigen::VectorXd, double> Bijector::forward(
    const Eigen::VectorXd& x) const {
  EagerStep s = forwardBatch(Tensor::fromMatrix(x.transpose()));
  Eigen::VectorXd y(s.y.cols());
  for (Index j = 0; j < y.size(); ++j) y[j] = s.y.at(0, j);
  return {y, s.logDet.at(0)};
}

std::pair<Eigen::VectorXd, double> Bijector::inverse(
    const Eigen::VectorXd& y) const {
  EagerStep s = inverseBatch(Tensor::fromMatrix(y.transpose()));
  Eigen::VectorXd x(s.y.cols());
  for (Index j = 0; j < x.size(); ++j) x[j] = s.y.at(0, j);
  return {x, s.logDet.at(0)};
}

// --- FixedLinear -------------------------------------------------------------

FixedLinear::FixedLinear(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() == 0 || m_.rows() != m_.cols())
    throw ShapeError("fixed_linear: matrix must be square and non-empty");
  if (!m_.allFinite()) throw NumericError("fixed_linear: non-finite matrix");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m_);
  if (std::abs(lu.determinant()) <= 1e-12)
    throw DomainError("fixed_linear: matrix is singular");
  double lad = 0.0;
  for (Index i = 0; i < m_.rows(); ++i)
    lad += std::log(std::abs(lu.matrixLU()(i, i)));
  logAbsDet_ = lad;
  mInv_ = lu.inverse();
  mT_ = Tensor::fromMatrix(m_.transpose());
  mInvT_ = Tensor::fromMatrix(mInv_.transpose());
}

EagerStep FixedLinear::forwardBatch(const Tensor& x) const {
  checkBatch(x, "fixed_linear");
  EagerExec e;
  auto y = e.matmul(x, e.constant(mT_));
  auto ld = constRows(e, x.rows(), e.constant(Tensor::scalar(logAbsDet_)));
  return {y, ld};
}

EagerStep FixedLinear::inverseBatch(const Tensor& y) const {
  checkBatch(y, "fixed_linear");
  EagerExec e;
  auto x = e.matmul(y, e.constant(mInvT_));
  auto ld = constRows(e, y.rows(), e.constant(Tensor::scalar(-logAbsDet_)));
  return {x, ld};
}

TapeStep FixedLinear::forwardOnTape(Tape& t, NodeId x,
                                    std::vector<ParamBinding>*) {
  TapeExec e{&t, nullptr};
  auto y = e.matmul(x, e.constant(mT_));
  auto ld = constRows(e, e.rowsOf(x), e.constant(Tensor::scalar(logAbsDet_)));
  return {y, ld};
}

TapeStep FixedLinear::inverseOnTape(Tape& t, NodeId y,
                                    std::vector<ParamBinding>*) {
  TapeExec e{&t, nullptr};
  auto x = e.matmul(y, e.constant(mInvT_));
  auto ld = constRows(e, e.rowsOf(y), e.constant(Tensor::scalar(-logAbsDet_)));
  return {x, ld};
}

nlohmann::ordered_json FixedLinear::toJson() const {
  json j;
  j["kind"] = kind();
  j["matrix"] = tensorToJson(Tensor::fromMatrix(m_));
  return j;
}

// --- NonlinearShear2D ---------------------------------------------------------

NonlinearShear2D::NonlinearShear2D(double divisor) : divisor_(divisor) {
  if (!(divisor > 0.0) || !std::isfinite(divisor))
    throw DomainError("nonlinear_shear2d: divisor must be positive");
}

EagerStep NonlinearShear2D::forwardBatch(const Tensor& x) const {
  checkBatch(x, "nonlinear_shear2d");
  EagerExec e;
  auto [y, ld] = shearForward(e, x, divisor_, x.rows());
  return {y, ld};
}

EagerStep NonlinearShear2D::inverseBatch(const Tensor& y) const {
  checkBatch(y, "nonlinear_shear2d");
  EagerExec e;
  auto [x, ld] = shearInverse(e, y, divisor_, y.rows());
  return {x, ld};
}

TapeStep NonlinearShear2D::forwardOnTape(Tape& t, NodeId x,
                                         std::vector<ParamBinding>*) {
  TapeExec e{&t, nullptr};
  auto [y, ld] = shearForward(e, x, divisor_, e.rowsOf(x));
  return {y, ld};
}

TapeStep NonlinearShear2D::inverseOnTape(Tape& t, NodeId y,
                                         std::vector<ParamBinding>*) {
  TapeExec e{&t, nullptr};
  auto [x, ld] = shearInverse(e, y, divisor_, e.rowsOf(y));
  return {x, ld};
}

nlohmann::ordered_json NonlinearShear2D::toJson() const {
  json j;
  j["kind"] = kind();
  j["divisor"] = divisor_;
  return j;
}

// --- SquareScale1D -------------------------------------------------------------

SquareScale1D::SquareScale1D(double coefficient) : coefficient_(coefficient) {
  if (!(coefficient > 0.0) || !std::isfinite(coefficient))
    throw DomainError("square_scale1d: coefficient must be positive");
}

EagerStep SquareScale1D::forwardBatch(const Tensor& x) const {
  checkBatch(x, "square_scale1d");
  EagerExec e;
  auto [y, ld] = squareForward(e, x, coefficient_, x.rows());
  return {y, ld};
}

EagerStep SquareScale1D::inverseBatch(const Tensor& y) const {
  checkBatch(y, "square_scale1d");
  EagerExec e;
  auto [x, ld] = squareInverse(e, y, coefficient_, y.rows());
  return {x, ld};
}

TapeStep SquareScale1D::forwardOnTape(Tape& t, NodeId x,
                                      std::vector<ParamBinding>*) {
  TapeExec e{&t, nullptr};
  auto [y, ld] = squareForward(e, x, coefficient_, e.rowsOf(x));
  return {y, ld};
}

TapeStep SquareScale1D::inverseOnTape(Tape& t, NodeId y,
                                      std::vector<ParamBinding>*) {
  TapeExec e{&t, nullptr};
  auto [x, ld] = squareInverse(e, y, coefficient_, e.rowsOf(y));
  return {x, ld};
}

nlohmann::ordered_json SquareScale1D::toJson() const {
  json j;
  j["kind"] = kind();
  j["coefficient"] = coefficient_;
  return j;
}

// --- LogitSquash ---------------------------------------------------------------

LogitSquash::LogitSquash(Index dim, double eps) : dim_(dim), eps_(eps) {
  if (dim <= 0) throw ShapeError("logit_squash: dim must be positive");
  if (!(eps > 0.0 && eps < 0.5))
    throw DomainError("logit_squash: eps must lie in (0, 0.5)");
}

EagerStep LogitSquash::forwardBatch(const Tensor& x) const {
  checkBatch(x, "logit_squash");
  EagerExec e;
  auto [y, ld] = squashForward(e, x, eps_, x.rows());
  return {y, ld};
}

EagerStep LogitSquash::inverseBatch(const Tensor& y) const {
  checkBatch(y, "logit_squash");
  EagerExec e;
  auto [x, ld] = squashInverse(e, y, eps_, y.rows());
  return {x, ld};
}

TapeStep LogitSquash::forwardOnTape(Tape& t, NodeId x,
                                    std::vector<ParamBinding>*) {
  TapeExec e{&t, nullptr};
  auto [y, ld] = squashForward(e, x, eps_, e.rowsOf(x));
  return {y, ld};
}

TapeStep LogitSquash::inverseOnTape(Tape& t, NodeId y,
                                    std::vector<ParamBinding>*) {
  TapeExec e{&t, nullptr};
  auto [x, ld] = squashInverse(e, y, eps_, e.rowsOf(y));
  return {x, ld};
}

nlohmann::ordered_json LogitSquash::toJson() const {
  json j;
  j["kind"] = kind();
  j["dim"] = dim_;
  j["eps"] = eps_;
  return j;
}

// --- Inverted --------------------------------------------------------------------

Inverted::Inverted(std::unique_ptr<Bijector> inner) : inner_(std::move(inner)) {
  if (!inner_) throw ShapeError("inverted: missing inner bijector");
}

EagerStep Inverted::forwardBatch(const Tensor& x) const {
  return inner_->inverseBatch(x);
}

EagerStep Inverted::inverseBatch(const Tensor& y) const {
  return inner_->forwardBatch(y);
}

TapeStep Inverted::forwardOnTape(Tape& t, NodeId x,
                                 std::vector<ParamBinding>* bindings) {
  return inner_->inverseOnTape(t, x, bindings);
}

TapeStep Inverted::inverseOnTape(Tape& t, NodeId y,
                                 std::vector<ParamBinding>* bindings) {
  return inner_->forwardOnTape(t, y, bindings);
}

nlohmann::ordered_json Inverted::toJson() const {
  json j;
  j["kind"] = kind();
  j["inner"] = inner_->toJson();
  return j;
}

// --- Chain -------------------------------------------------------------------------

Chain::Chain(std::vector<std::unique_ptr<Bijector>> steps)
    : steps_(std::move(steps)) {
  for (size_t i = 0; i < steps_.size(); ++i) {
    if (!steps_[i]) throw ShapeError("chain: null step");
    if (steps_[i]->dim() != steps_[0]->dim())
      throw ShapeError("chain: step dims disagree");
  }
}

void Chain::append(std::unique_ptr<Bijector> step) {
  if (!step) throw ShapeError("chain: null step");
  if (!steps_.empty() && step->dim() != steps_[0]->dim())
    throw ShapeError("chain: step dims disagree");
  steps_.push_back(std::move(step));
}

EagerStep Chain::forwardBatch(const Tensor& x) const {
  checkBatch(x, "chain");
  EagerStep acc{x, Tensor::zeros({x.rows(), 1})};
  for (const auto& s : steps_) {
    EagerStep st = s->forwardBatch(acc.y);
    acc.y = std::move(st.y);
    acc.logDet = add(acc.logDet, st.logDet);
  }
  return acc;
}

EagerStep Chain::inverseBatch(const Tensor& y) const {
  checkBatch(y, "chain");
  EagerStep acc{y, Tensor::zeros({y.rows(), 1})};
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    EagerStep st = (*it)->inverseBatch(acc.y);
    acc.y = std::move(st.y);
    acc.logDet = add(acc.logDet, st.logDet);
  }
  return acc;
}

TapeStep Chain::forwardOnTape(Tape& t, NodeId x,
                              std::vector<ParamBinding>* bindings) {
  TapeStep acc{x, t.constant(Tensor::zeros({t.value(x).rows(), 1}))};
  for (const auto& s : steps_) {
    TapeStep st = s->forwardOnTape(t, acc.y, bindings);
    acc.y = st.y;
    acc.logDet = t.add(acc.logDet, st.logDet);
  }
  return acc;
}

TapeStep Chain::inverseOnTape(Tape& t, NodeId y,
                              std::vector<ParamBinding>* bindings) {
  TapeStep acc{y, t.constant(Tensor::zeros({t.value(y).rows(), 1}))};
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    TapeStep st = (*it)->inverseOnTape(t, acc.y, bindings);
    acc.y = st.y;
    acc.logDet = t.add(acc.logDet, st.logDet);
  }
  return acc;
}

std::vector<ParamRef> Chain::parameters() {
  std::vector<ParamRef> out;
  for (size_t i = 0; i < steps_.size(); ++i) {
    for (ParamRef& p : steps_[i]->parameters())
      out.push_back({"b" + std::to_string(i) + "." + p.name, p.value});
  }
  return out;
}

nlohmann::ordered_json Chain::toJson() const {
  json j;
  j["kind"] = kind();
  json steps = json::array();
  for (const auto& s : steps_) steps.push_back(s->toJson());
  j["steps"] = std::move(steps);
  return j;
}

// --- Deserialization ------------------------------------------------------------------

std::unique_ptr<Bijector> bijectorFromJson(const nlohmann::ordered_json& j) {
  if (!j.contains("kind")) throw DataError("bijector json: missing kind");
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "fixed_linear")
      return std::make_unique<FixedLinear>(
          tensorFromJson(j.at("matrix")).toMatrix());
    if (kind == "nonlinear_shear2d")
      return std::make_unique<NonlinearShear2D>(j.at("divisor").get<double>());
    if (kind == "square_scale1d")
      return std::make_unique<SquareScale1D>(j.at("coefficient").get<double>());
    if (kind == "logit_squash")
      return std::make_unique<LogitSquash>(j.at("dim").get<Index>(),
                                           j.at("eps").get<double>());
    if (kind == "inverted")
      return std::make_unique<Inverted>(bijectorFromJson(j.at("inner")));
    if (kind == "chain") {
      std::vector<std::unique_ptr<Bijector>> steps;
      for (const auto& s : j.at("steps")) steps.push_back(bijectorFromJson(s));
      return std::make_unique<Chain>(std::move(steps));
    }
    if (kind == "affine_coupling") return AffineCoupling::fromJson(j);
    if (kind == "lu_linear") return LULinear::fromJson(j);
  } catch (const json::exception& ex) {
    throw DataError("bijector json: " + std::string(ex.what()));
  }
  throw DataError("bijector json: unknown kind '" + kind + "'");
}

}  // namespace nf
