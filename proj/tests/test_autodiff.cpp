#include "doctest.h"
#include "sfm/autodiff.hpp"
#include "support.hpp"

using namespace sfm;

TEST_CASE("selu fixed point and constants") {
  CHECK(ad::selu(0.0) == 0.0);
  CHECK(ad::selu(1.0) == doctest::Approx(ad::kSeluLambda));
  CHECK(ad::selu(-50.0) == doctest::Approx(-ad::kSeluLambda * ad::kSeluAlpha));
}

TEST_CASE("matmul shape contract") {
  ad::Tape t;
  auto a = t.constant(Matrix(2, 3, 1.0));
  auto b = t.constant(Matrix(3, 1, 2.0));
  auto c = ad::matmul(a, b);
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 1);
  CHECK(c.data()(1, 0) == 6.0);
}

TEST_CASE("shape mismatch names both shapes") {
  ad::Tape t;
  auto a = t.constant(Matrix(2, 3));
  auto b = t.constant(Matrix(2, 3));
  try {
    ad::matmul(a, b);
    FAIL("expected error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2x3)") != std::string::npos);
    CHECK(msg.find("(2x3)", msg.find("(2x3)") + 1) != std::string::npos);
  }
}

TEST_CASE("non-finite input rejected") {
  ad::Tape t;
  Matrix m(1, 1, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(t.leaf(m), Error);
}

TEST_CASE("mse of identical arrays is zero") {
  ad::Tape t;
  Rng rng(1);
  auto v = testing::random_matrix(4, 3, rng);
  CHECK(ad::squared_error_mean(t.constant(v), t.constant(v)).scalar() == 0.0);
}

TEST_CASE("grad of sum(w*x) is x") {
  ad::Tape t;
  Rng rng(2);
  Matrix x = testing::random_matrix(3, 2, rng);
  auto w = t.leaf(testing::random_matrix(3, 2, rng));
  auto root = ad::sum(ad::mul(w, t.constant(x)));
  auto g = ad::backward(t, root);
  CHECK(g.at(w) == x);
}

TEST_CASE("grad of a leaf unused by the root is zero") {
  ad::Tape t;
  auto w = t.leaf(Matrix(2, 2, 1.0));
  auto c = t.leaf(Matrix(1, 1, 3.0));
  auto root = ad::scale(c, 2.0);
  auto g = ad::backward(t, root);
  CHECK(g.at(w) == Matrix(2, 2, 0.0));
  CHECK(g.at(c)(0, 0) == 2.0);
}

TEST_CASE("non-scalar root rejected") {
  ad::Tape t;
  auto w = t.leaf(Matrix(2, 2, 1.0));
  CHECK_THROWS_AS(ad::backward(t, w), Error);
}

TEST_CASE("random MLP gradients match central differences") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto c = testing::random_mlp(rng, 1 + rng.below(4), 8, 1 + rng.below(4), 5);
    CHECK(testing::mlp_gradient_error(c) < 1e-4);
  }
}

TEST_CASE("concat and mean gradients") {
  Rng rng(4);
  Matrix a0 = testing::random_matrix(3, 2, rng), b0 = testing::random_matrix(3, 1, rng);
  auto f = [&](const Matrix& a, const Matrix& b, ad::Value* la, ad::Value* lb, ad::Tape& t) {
    *la = t.leaf(a);
    *lb = t.leaf(b);
    auto c = ad::concat(*la, *lb);
    return ad::mean(ad::mul(c, c));
  };
  ad::Tape t;
  ad::Value la, lb;
  auto g = ad::backward(t, f(a0, b0, &la, &lb, t));
  const Matrix ga = g.at(la);
  const Matrix gb = g.at(lb);
  for (std::size_t k = 0; k < a0.size(); ++k) CHECK(ga.values()[k] == doctest::Approx(2.0 * a0.values()[k] / 9.0));
  for (std::size_t k = 0; k < b0.size(); ++k) CHECK(gb.values()[k] == doctest::Approx(2.0 * b0.values()[k] / 9.0));
}

TEST_CASE("backward is linear in the root") {
  Rng rng(5);
  auto c = testing::random_mlp(rng, 2, 6, 2, 4);
  ad::Tape t;
  std::vector<ad::Value> leaves;
  auto f = testing::mlp_loss(t, c, leaves);
  auto g2 = ad::sum(ad::mul(leaves[0], leaves[0]));
  auto root = ad::add(ad::scale(f, 2.0), ad::scale(g2, -3.0));
  auto gr = ad::backward(t, root).at(leaves[0]);
  auto gf = ad::backward(t, f).at(leaves[0]);
  auto gg = ad::backward(t, g2).at(leaves[0]);
  for (std::size_t k = 0; k < gr.size(); ++k) {
    CHECK(gr.values()[k] == doctest::Approx(2.0 * gf.values()[k] - 3.0 * gg.values()[k]).epsilon(1e-12));
  }
}

TEST_CASE("forward and backward are bit-identical on rerun") {
  auto run = [] {
    Rng rng(6);
    auto c = testing::random_mlp(rng, 3, 7, 2, 5);
    ad::Tape t;
    std::vector<ad::Value> leaves;
    auto root = testing::mlp_loss(t, c, leaves);
    return ad::backward(t, root).at(leaves[2]);
  };
  CHECK(run() == run());
}
