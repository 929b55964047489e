#include <algorithm>

#include "doctest.h"
#include "sfm/discrete_ot.hpp"
#include "sfm/error.hpp"
#include "support.hpp"

using namespace sfm;

namespace {

std::vector<double> random_simplex(std::size_t n, Rng& rng, double zero_prob = 0.0) {
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& v : w) {
    v = rng.uniform() < zero_prob ? 0.0 : rng.uniform(0.05, 1.0);
    s += v;
  }
  if (s == 0.0) {
    w[0] = 1.0;
    s = 1.0;
  }
  for (auto& v : w) v /= s;
  return w;
}

void check_marginals(const TransportPlan& p) {
  for (std::size_t i = 0; i < p.plan.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < p.plan.cols(); ++j) s += p.plan(i, j);
    CHECK(std::abs(s - p.a[i]) < 1e-9);
  }
  for (std::size_t j = 0; j < p.plan.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.plan.rows(); ++i) s += p.plan(i, j);
    CHECK(std::abs(s - p.b[j]) < 1e-9);
  }
}

}  // namespace

TEST_CASE("single cell") {
  std::vector<double> a{1.0}, b{1.0};
  auto p = solve_emd(a, b, Matrix(1, 1, 3.5));
  CHECK(p.plan(0, 0) == 1.0);
  CHECK(p.cost == 3.5);
}

TEST_CASE("zero-cost matching") {
  std::vector<double> a{0.5, 0.5};
  auto p = solve_emd(a, a, Matrix::from_rows({{0, 1}, {1, 0}}));
  CHECK(p.cost == 0.0);
  CHECK(p.plan(0, 0) == 0.5);
  CHECK(p.plan(1, 1) == 0.5);
}

TEST_CASE("bad marginals rejected") {
  std::vector<double> a{0.5, 0.6}, b{1.0}, neg{1.5, -0.5};
  CHECK_THROWS_AS(solve_emd(a, b, Matrix(2, 1)), Error);
  CHECK_THROWS_AS(solve_emd(neg, b, Matrix(2, 1)), Error);
}

TEST_CASE("brute force 2x2 picks the diagonal") {
  std::vector<double> a{0.5, 0.5};
  auto p = brute_force_emd(a, a, Matrix::from_rows({{1, 2}, {3, 0}}));
  CHECK(p.cost == doctest::Approx(0.5));
  CHECK(p.plan(0, 0) == 0.5);
}

TEST_CASE("brute force 1xk is forced") {
  std::vector<double> a{1.0}, b{0.2, 0.3, 0.5};
  auto p = brute_force_emd(a, b, Matrix::from_rows({{4, 1, 2}}));
  CHECK(p.plan(0, 1) == 0.3);
  CHECK(p.cost == doctest::Approx(0.8 + 0.3 + 1.0));
}

TEST_CASE("brute force refuses large instances") {
  std::vector<double> a(7, 1.0 / 7), b(6, 1.0 / 6);
  CHECK_THROWS_AS(brute_force_emd(a, b, Matrix(7, 6)), Error);
}

TEST_CASE("5x5 uniform matches permutation brute force") {
  Rng rng(11);
  std::vector<double> a(5, 0.2);
  for (int t = 0; t < 30; ++t) {
    Matrix c = testing::random_matrix(5, 5, rng, 0.0, 1.0);
    auto p = solve_emd(a, a, c);
    CHECK(std::abs(p.cost - brute_force_emd(a, a, c).cost) < 1e-9);
    check_marginals(p);
  }
}

TEST_CASE("random 3x3 agrees with brute force") {
  Rng rng(12);
  for (int t = 0; t < 200; ++t) {
    auto a = random_simplex(3, rng), b = random_simplex(3, rng);
    Matrix c = testing::random_matrix(3, 3, rng, 0.0, 1.0);
    auto p = solve_emd(a, b, c);
    CHECK(std::abs(p.cost - brute_force_emd(a, b, c).cost) < 1e-9);
    CHECK(p.nonzeros() <= 5);
  }
}

TEST_CASE("zero marginals are stripped and reinserted") {
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    auto a = random_simplex(4, rng, 0.3), b = random_simplex(3, rng, 0.3);
    Matrix c = testing::random_matrix(4, 3, rng, 0.0, 1.0);
    auto p = solve_emd(a, b, c);
    CHECK(std::abs(p.cost - brute_force_emd(a, b, c).cost) < 1e-9);
    for (std::size_t i = 0; i < 4; ++i) {
      if (a[i] == 0.0) {
        for (std::size_t j = 0; j < 3; ++j) CHECK(p.plan(i, j) == 0.0);
      }
    }
    check_marginals(p);
  }
}

TEST_CASE("cyclical monotonicity of the support") {
  Rng rng(14);
  Matrix x = testing::random_matrix(20, 2, rng), y = testing::random_matrix(20, 2, rng);
  std::vector<double> w(20, 0.05);
  Matrix c = squared_cost(x, y);
  auto p = solve_emd(w, w, c);
  std::vector<std::pair<std::size_t, std::size_t>> supp;
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = 0; j < 20; ++j) {
      if (p.plan(i, j) > 0.0) supp.emplace_back(i, j);
    }
  }
  for (auto [i, j] : supp) {
    for (auto [k, l] : supp) CHECK(c(i, j) + c(k, l) <= c(i, l) + c(k, j) + 1e-12);
  }
}

TEST_CASE("w2 basics") {
  Rng rng(15);
  Matrix x = testing::random_matrix(30, 2, rng), y = testing::random_matrix(25, 2, rng);
  CHECK(w2_squared(x, x) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(w2_squared(Matrix(1, 2, 0.0), Matrix::from_rows({{3, 4}})) == doctest::Approx(25.0));
  CHECK(w2_squared(x, y) == doctest::Approx(w2_squared(y, x)).epsilon(1e-12));
  Matrix x2 = x, y2 = y;
  for (auto& v : x2.values()) v *= 3.0;
  for (auto& v : y2.values()) v *= 3.0;
  CHECK(w2_squared(x2, y2) == doctest::Approx(9.0 * w2_squared(x, y)).epsilon(1e-10));
}

TEST_CASE("monotone oracle") {
  std::vector<double> x{0.0, 0.0}, y{-1.0, 1.0};
  CHECK(solve_1d_monotone(x, x).cost == 0.0);
  CHECK(solve_1d_monotone(x, y).cost == 1.0);
  std::vector<double> z{1.0};
  CHECK_THROWS_AS(solve_1d_monotone(x, z), Error);
}

TEST_CASE("1-d w2 equals monotone cost at n=64") {
  Rng rng(16);
  Matrix x = testing::random_matrix(64, 1, rng), y = testing::random_matrix(64, 1, rng, 0.0, 5.0);
  CHECK(std::abs(w2_squared(x, y) - solve_1d_monotone(x.values(), y.values()).cost) < 1e-9);
}

TEST_CASE("512-point solve is exact and sparse") {
  Rng rng(17);
  Matrix x = testing::random_matrix(512, 2, rng), y = testing::random_matrix(512, 2, rng);
  std::vector<double> w(512, 1.0 / 512);
  auto p = solve_emd(w, w, squared_cost(x, y));
  CHECK(p.nonzeros() <= 1023);
  check_marginals(p);
}
