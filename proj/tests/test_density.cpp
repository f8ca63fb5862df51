#include <doctest.h>

#include <cmath>
#include <cstring>
#include <memory>

#include "nf/coupling.hpp"
#include "nf/density.hpp"
#include "nf/lu_linear.hpp"
#include "oracles.hpp"

using namespace nf;

namespace {

const double kPi = 3.14159265358979323846;

bool bitEqual(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(),
                     sizeof(double) * static_cast<size_t>(a.size())) == 0;
}

FlowModel identityModel(Index dim) {
  return FlowModel(std::make_unique<DiagonalStandardNormal>(dim), Chain{});
}

FlowModel discModel() {
  Chain chain;
  chain.append(
      std::make_unique<Inverted>(std::make_unique<SquareScale1D>(kPi / 4.0)));
  return FlowModel(std::make_unique<UniformInterval>(5.0, 6.0),
                   std::move(chain));
}

}  // namespace

TEST_CASE("standard normal log density: frozen values") {
  DiagonalStandardNormal n2(2);
  Tensor origin = Tensor::zeros({1, 2});
  CHECK(n2.logProbRows(origin)[0] == -1.8378770664093453);

  DiagonalStandardNormal n1(1);
  Tensor one = Tensor::ones({1, 1});
  CHECK(n1.logProbRows(one)[0] ==
        doctest::Approx(-1.4189385332046727).epsilon(1e-15));
}

TEST_CASE("standard normal factorizes over dimensions") {
  DiagonalStandardNormal n2(2);
  DiagonalStandardNormal n1(1);
  oracles::TestRng trng(4);
  for (int i = 0; i < 50; ++i) {
    Tensor z = trng.tensor({1, 2}, -3.0, 3.0);
    Tensor a = Tensor::zeros({1, 1}), b = Tensor::zeros({1, 1});
    a.at(0) = z.at(0, 0);
    b.at(0) = z.at(0, 1);
    const double joint = n2.logProbRows(z)[0];
    const double split = n1.logProbRows(a)[0] + n1.logProbRows(b)[0];
    CHECK(joint == doctest::Approx(split).epsilon(1e-12));
  }
}

TEST_CASE("tape total matches the plain per-row sum") {
  DiagonalStandardNormal n3(3);
  oracles::TestRng trng(8);
  Tensor z = trng.tensor({7, 3}, -3.0, 3.0);
  Tape t;
  const double total = t.value(n3.logProbTotalOnTape(t, t.constant(z)))
                           .scalarValue();
  const Eigen::VectorXd rows = n3.logProbRows(z);
  CHECK(total == doctest::Approx(rows.sum()).epsilon(1e-12));
}

TEST_CASE("log prob through an identity chain is the base density") {
  FlowModel m = identityModel(2);
  CHECK(m.logProb(Eigen::Vector2d(0.0, 0.0)) == -1.8378770664093453);
}

TEST_CASE("log prob of a linearly stretched gaussian") {
  Eigen::MatrixXd shrink(2, 2);
  shrink << 0.1, 0.0, 0.0, 1.0;  // data->latent map of a 10x stretch
  Chain chain;
  chain.append(std::make_unique<FixedLinear>(shrink));
  FlowModel m(std::make_unique<DiagonalStandardNormal>(2), std::move(chain));
  CHECK(m.logProb(Eigen::Vector2d(0.0, 0.0)) ==
        doctest::Approx(-4.140462159403391).epsilon(1e-13));
}

TEST_CASE("disc model reproduces the analytic diameter-to-area density") {
  FlowModel m = discModel();
  Eigen::VectorXd a(1);
  a[0] = 9.0 * kPi;
  CHECK(std::exp(m.logProb(a)) ==
        doctest::Approx(0.1061032953945969).epsilon(1e-12));
  a[0] = 25.0 * kPi / 4.0;
  CHECK(std::exp(m.logProb(a)) ==
        doctest::Approx(0.12732395447351627).epsilon(1e-12));

  // Areas whose diameters fall outside [5, 6] are out of support.
  a[0] = kPi / 4.0 * 16.0;  // D = 4
  CHECK(m.logProb(a) == -std::numeric_limits<double>::infinity());
  a[0] = kPi / 4.0 * 49.0;  // D = 7
  CHECK(m.logProb(a) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("change of variables matches the factored two-step computation") {
  Chain chain;
  chain.append(std::make_unique<NonlinearShear2D>(40.0));
  Eigen::MatrixXd r(2, 2);
  r << 0.6, -0.8, 0.8, 0.6;
  chain.append(std::make_unique<FixedLinear>(r));
  FlowModel m(std::make_unique<DiagonalStandardNormal>(2), std::move(chain));

  DiagonalStandardNormal base(2);
  oracles::TestRng trng(13);
  Tensor x = trng.tensor({40, 2}, -5.0, 5.0);
  EagerStep fwd = m.chain().forwardBatch(x);
  Eigen::VectorXd lp = m.logProbBatch(x);
  Eigen::VectorXd baseLp = base.logProbRows(fwd.y);
  for (Index i = 0; i < 40; ++i)
    CHECK(lp[i] ==
          doctest::Approx(baseLp[i] + fwd.logDet.at(i, 0)).epsilon(1e-12));
}

TEST_CASE("density is consistent along the sampling direction") {
  CounterRng rng(19);
  oracles::TestRng trng(20);
  Chain chain;
  chain.append(std::make_unique<AffineCoupling>(2, 8, 0, rng));
  chain.append(std::make_unique<AffineCoupling>(2, 8, 1, rng));
  for (auto& p : chain.parameters())
    for (Index i = 0; i < p.value->size(); ++i)
      p.value->at(i) += trng.uniform(-0.3, 0.3);
  FlowModel m(std::make_unique<DiagonalStandardNormal>(2), std::move(chain));

  DiagonalStandardNormal base(2);
  Tensor z = trng.tensor({30, 2}, -2.5, 2.5);
  EagerStep inv = m.chain().inverseBatch(z);
  Eigen::VectorXd lp = m.logProbBatch(inv.y);
  Eigen::VectorXd baseLp = base.logProbRows(z);
  for (Index i = 0; i < 30; ++i)
    CHECK(std::abs(lp[i] - (baseLp[i] - inv.logDet.at(i, 0))) <= 1e-9);
}

TEST_CASE("sampling: moments, determinism, and seed sensitivity") {
  FlowModel m = identityModel(2);
  Tensor s = m.sample(5000, 42);
  REQUIRE(s.rows() == 5000);
  REQUIRE(s.cols() == 2);
  for (Index j = 0; j < 2; ++j) {
    Eigen::VectorXd col(5000);
    for (Index i = 0; i < 5000; ++i) col[i] = s.at(i, j);
    CHECK(std::abs(oracles::sampleMean(col)) <= 0.05);
    CHECK(oracles::sampleStd(col) >= 0.95);
    CHECK(oracles::sampleStd(col) <= 1.05);
  }
  CHECK(bitEqual(s, m.sample(5000, 42)));
  CHECK(!bitEqual(s, m.sample(5000, 43)));
}

TEST_CASE("grid integral of the identity models") {
  FlowModel m1 = identityModel(1);
  CHECK(std::abs(m1.gridIntegral({{-8.0, 8.0}}, 0.01) - 1.0) <= 1e-6);

  FlowModel m2 = identityModel(2);
  CHECK(std::abs(m2.gridIntegral({{-8.0, 8.0}, {-8.0, 8.0}}, 0.05) - 1.0) <=
        1e-4);
}

TEST_CASE("grid integral argument validation") {
  FlowModel m = identityModel(2);
  CHECK_THROWS_AS(m.gridIntegral({{-1.0, 1.0}, {-1.0, 1.0}}, 0.0), DomainError);
  CHECK_THROWS_AS(m.gridIntegral({{-1.0, 1.0}}, 0.1), ShapeError);
  CHECK_THROWS_AS(m.gridIntegral({{2.0, -2.0}, {-1.0, 1.0}}, 0.1), DomainError);
  FlowModel m3 = identityModel(3);
  CHECK_THROWS_AS(m3.gridIntegral({{-1, 1}, {-1, 1}, {-1, 1}}, 0.5),
                  ShapeError);
}

TEST_CASE("flow model rejects mismatched base and chain dims") {
  Chain chain;
  chain.append(std::make_unique<LogitSquash>(3));
  CHECK_THROWS_AS(
      FlowModel(std::make_unique<DiagonalStandardNormal>(2), std::move(chain)),
      ShapeError);
}
