#include <doctest.h>

#include <cstring>

#include "nf/tensor.hpp"
#include "oracles.hpp"

using nf::Index;
using nf::Tensor;

TEST_CASE("tensor shape bookkeeping") {
  Tensor t = Tensor::zeros({3, 4});
  CHECK(t.rank() == 2);
  CHECK(t.size() == 12);
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 4);

  Tensor s = Tensor::scalar(2.5);
  CHECK(s.rank() == 0);
  CHECK(s.isScalar());
  CHECK(s.scalarValue() == 2.5);

  CHECK_THROWS_AS(Tensor::zeros({0, 3}), nf::ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({-1}), nf::ShapeError);
  CHECK_THROWS_AS(Tensor::fromFlat({2, 3}, Eigen::ArrayXd::Zero(5)),
                  nf::ShapeError);
}

TEST_CASE("tensor storage is flat row-major") {
  Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  CHECK(m.at(0) == 1);
  CHECK(m.at(2) == 3);
  CHECK(m.at(3) == 4);
  CHECK(m.at(1, 2) == 6);

  Eigen::MatrixXd e = m.toMatrix();
  CHECK(e(1, 0) == 4);
  Tensor back = Tensor::fromMatrix(e);
  CHECK(back.sameShape(m));
  for (Index i = 0; i < m.size(); ++i) CHECK(back.at(i) == m.at(i));
}

TEST_CASE("tensor rejects non-finite elements") {
  Eigen::ArrayXd d(2);
  d << 1.0, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(Tensor::fromFlat({2}, d), nf::NumericError);
}

TEST_CASE("elementwise ops and scalar broadcast") {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor b = Tensor::matrix({{10, 20}, {30, 40}});
  Tensor c = add(a, b);
  CHECK(c.at(1, 1) == 44);
  CHECK(sub(b, a).at(0, 0) == 9);
  CHECK(mul(a, b).at(0, 1) == 40);

  Tensor s = Tensor::scalar(2.0);
  CHECK(mul(a, s).at(1, 0) == 6);
  CHECK(add(s, a).at(0, 0) == 3);
  CHECK(sub(a, s).at(0, 0) == -1);

  Tensor wrong = Tensor::zeros({3, 2});
  CHECK_THROWS_AS(add(a, wrong), nf::ShapeError);
  CHECK_THROWS_AS(add(Tensor::vector({1, 2}), Tensor::matrix({{1, 2}})),
                  nf::ShapeError);
}

TEST_CASE("matmul matches a naive oracle on random shapes") {
  oracles::TestRng rng(101);
  for (int rep = 0; rep < 20; ++rep) {
    const Index m = 1 + rep % 5, k = 1 + (rep * 3) % 7, n = 1 + (rep * 5) % 6;
    Tensor a = rng.tensor({m, k});
    Tensor b = rng.tensor({k, n});
    Tensor c = matmul(a, b);
    Tensor ref = oracles::matmulNaive(a, b);
    for (Index i = 0; i < c.size(); ++i)
      CHECK(c.at(i) == doctest::Approx(ref.at(i)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2})),
                  nf::ShapeError);
  CHECK_THROWS_AS(matmul(Tensor::vector({1, 2}), Tensor::zeros({2, 2})),
                  nf::ShapeError);
}

TEST_CASE("matmul of a diagonal stretch") {
  Tensor m = Tensor::matrix({{10, 0}, {0, 1}});
  Tensor v = Tensor::matrix({{1}, {1}});
  Tensor r = matmul(m, v);
  CHECK(r.at(0) == 10.0);
  CHECK(r.at(1) == 1.0);
}

TEST_CASE("unary op domains and values") {
  Tensor x = Tensor::vector({0.5, 1.0, 2.0});
  CHECK(log(x).at(0) == doctest::Approx(std::log(0.5)));
  CHECK(exp(Tensor::scalar(0.0)).scalarValue() == 1.0);
  CHECK(relu(Tensor::vector({-1, 0, 3})).at(0) == 0.0);
  CHECK(relu(Tensor::vector({-1, 0, 3})).at(2) == 3.0);
  CHECK(abs(Tensor::vector({-2, 2})).at(0) == 2.0);
  CHECK(neg(Tensor::scalar(3)).scalarValue() == -3.0);
  CHECK(reciprocal(Tensor::scalar(4)).scalarValue() == 0.25);
  CHECK(tanh(Tensor::scalar(0)).scalarValue() == 0.0);

  CHECK_THROWS_AS(log(Tensor::vector({1, -1})), nf::DomainError);
  CHECK_THROWS_AS(log(Tensor::scalar(0)), nf::DomainError);
  CHECK_THROWS_AS(reciprocal(Tensor::vector({1, 0})), nf::DomainError);
  CHECK_THROWS_AS(exp(Tensor::scalar(1000)), nf::NumericError);
}

TEST_CASE("reductions accumulate left to right") {
  Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  CHECK(sum(m).scalarValue() == 21.0);

  Tensor rs = rowSum(m);
  CHECK(rs.rows() == 2);
  CHECK(rs.cols() == 1);
  CHECK(rs.at(0) == 6.0);
  CHECK(rs.at(1) == 15.0);

  // Fixed order: ((a+b)+c)+... over flat row-major elements.
  Tensor tricky = Tensor::vector({1e16, 1.0, -1e16});
  CHECK(sum(tricky).scalarValue() == ((1e16 + 1.0) + -1e16));
}

TEST_CASE("structural ops") {
  Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  Tensor t = transpose(m);
  CHECK(t.rows() == 3);
  CHECK(t.at(2, 1) == 6.0);

  Tensor sel = selectCols(m, {2, 0});
  CHECK(sel.cols() == 2);
  CHECK(sel.at(0, 0) == 3.0);
  CHECK(sel.at(1, 1) == 4.0);

  Tensor sc = scatterCols(sel, {2, 0}, 3);
  CHECK(sc.at(0, 2) == 3.0);
  CHECK(sc.at(0, 1) == 0.0);
  CHECK(sc.at(1, 0) == 4.0);

  CHECK_THROWS_AS(selectCols(m, {3}), nf::ShapeError);
  CHECK_THROWS_AS(scatterCols(sel, {0, 0}, 3), nf::ShapeError);
  CHECK_THROWS_AS(scatterCols(sel, {0}, 3), nf::ShapeError);

  Tensor d = diagEmbed(Tensor::vector({2, 3}));
  CHECK(d.at(0, 0) == 2.0);
  CHECK(d.at(1, 1) == 3.0);
  CHECK(d.at(0, 1) == 0.0);
  CHECK_THROWS_AS(diagEmbed(m), nf::ShapeError);
}

TEST_CASE("kernels are bit-identical across runs") {
  oracles::TestRng rng(77);
  Tensor a = rng.tensor({4, 6});
  Tensor b = rng.tensor({6, 3});
  Tensor c1 = matmul(a, b);
  Tensor c2 = matmul(a, b);
  CHECK(std::memcmp(c1.data().data(), c2.data().data(),
                    sizeof(double) * c1.size()) == 0);
  Tensor s1 = sum(mul(a, a));
  Tensor s2 = sum(mul(a, a));
  CHECK(std::memcmp(s1.data().data(), s2.data().data(), sizeof(double)) == 0);
}

TEST_CASE("size-1 operands keep the higher-rank shape") {
  Tensor cell = Tensor::ones({1, 1});
  Tensor s = Tensor::scalar(3.0);

  Tensor a = nf::add(s, cell);
  CHECK(a.shape() == std::vector<Index>{1, 1});
  CHECK(a.at(0) == 4.0);
  Tensor b = nf::mul(cell, s);
  CHECK(b.shape() == std::vector<Index>{1, 1});

  CHECK(nf::add(s, s).rank() == 0);
  CHECK(nf::rowSum(nf::sub(s, cell)).shape() == std::vector<Index>{1, 1});
}
