#include <cmath>
#include <map>

#include "doctest.h"
#include "sfm/coupling.hpp"
#include "sfm/discrete_ot.hpp"
#include "sfm/error.hpp"
#include "support.hpp"

using namespace sfm;

namespace {

std::vector<double> uniform(std::size_t k) { return std::vector<double>(k, 1.0 / static_cast<double>(k)); }

Matrix ordered_cost(std::size_t k0, std::size_t k1) {
  std::vector<std::vector<double>> m0, m1;
  for (std::size_t i = 0; i < k0; ++i) m0.push_back({k0 == 1 ? 0.0 : -1.0 + 2.0 * i / (k0 - 1.0)});
  for (std::size_t j = 0; j < k1; ++j) m1.push_back({k1 == 1 ? 0.0 : -1.0 + 2.0 * j / (k1 - 1.0)});
  return inter_cluster_cost(m0, m1, ClusterCost::MeanDistance);
}

LabeledBatch labeled(std::vector<int> y0, std::vector<int> y1, Rng& rng, std::size_t d = 1) {
  LabeledBatch b;
  b.x0 = testing::random_matrix(y0.size(), d, rng);
  b.x1 = testing::random_matrix(y1.size(), d, rng);
  b.y0 = std::move(y0);
  b.y1 = std::move(y1);
  return b;
}

}  // namespace

TEST_CASE("two2ten mixed") {
  auto c = make_coupling_matrix(CouplingKind::Mixed, uniform(2), uniform(10));
  for (double v : c.p.values()) CHECK(v == doctest::Approx(0.05));
}

TEST_CASE("two2ten extremal") {
  Matrix cost = ordered_cost(2, 10);
  auto c = make_coupling_matrix(CouplingKind::Extremal, uniform(2), uniform(10), &cost);
  for (std::size_t j = 0; j < 10; ++j) {
    CHECK(c.p(0, j) == doctest::Approx(j < 5 ? 0.1 : 0.0));
    CHECK(c.p(1, j) == doctest::Approx(j < 5 ? 0.0 : 0.1));
  }
  CHECK(c.positive_cells() <= 11);
}

TEST_CASE("one2one and shape errors") {
  auto c = make_coupling_matrix(CouplingKind::One2One, uniform(1), uniform(1));
  CHECK(c.p == Matrix(1, 1, 1.0));
  CHECK_THROWS_AS(make_coupling_matrix(CouplingKind::One2One, uniform(2), uniform(1)), Error);
  CHECK_THROWS_AS(make_coupling_matrix(CouplingKind::Extremal, uniform(2), uniform(2)), Error);
  CHECK_THROWS_AS(make_custom_coupling(Matrix::from_rows({{0.5, 0.0}, {0.0, 0.4}}), uniform(2), uniform(2)), Error);
}

TEST_CASE("extremal couplings are sparse") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const std::size_t k0 = 1 + rng.below(6), k1 = 1 + rng.below(6);
    std::vector<double> r0(k0), r1(k1);
    double s0 = 0, s1 = 0;
    for (auto& v : r0) s0 += (v = rng.uniform(0.1, 1));
    for (auto& v : r1) s1 += (v = rng.uniform(0.1, 1));
    for (auto& v : r0) v /= s0;
    for (auto& v : r1) v /= s1;
    Matrix cost = testing::random_matrix(k0, k1, rng, 0, 1);
    auto c = make_coupling_matrix(CouplingKind::Extremal, r0, r1, &cost);
    CHECK(c.positive_cells() <= k0 + k1 - 1);
  }
}

TEST_CASE("batch matrix: K=1, m=2") {
  auto c = make_coupling_matrix(CouplingKind::One2One, uniform(1), uniform(1));
  std::vector<int> y{0, 0};
  auto pm = build_batch_matrix(c, y, y);
  for (double v : pm.pm.values()) CHECK(v == 0.25);
}

TEST_CASE("batch matrix: diagonal P") {
  auto c = make_custom_coupling(Matrix::from_rows({{0.5, 0.0}, {0.0, 0.5}}), uniform(2), uniform(2));
  std::vector<int> y{0, 1};
  auto pm = build_batch_matrix(c, y, y);
  CHECK(pm.pm == Matrix::from_rows({{0.5, 0.0}, {0.0, 0.5}}));
}

TEST_CASE("batch matrix sums to one and respects zero cells") {
  Rng rng(2);
  Matrix cost = ordered_cost(2, 3);
  auto c = make_coupling_matrix(CouplingKind::Extremal, uniform(2), uniform(3), &cost);
  std::vector<int> y0, y1;
  for (int k = 0; k < 40; ++k) {
    y0.push_back(static_cast<int>(rng.below(2)));
    y1.push_back(static_cast<int>(rng.below(3)));
  }
  auto pm = build_batch_matrix(c, y0, y1);
  double s = 0.0;
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t j = 0; j < 40; ++j) {
      s += pm.pm(i, j);
      if (c.p(static_cast<std::size_t>(y0[i]), static_cast<std::size_t>(y1[j])) == 0.0) CHECK(pm.pm(i, j) == 0.0);
    }
  }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("unrepresented cell names the cell") {
  auto c = make_coupling_matrix(CouplingKind::Mixed, uniform(2), uniform(2));
  std::vector<int> y0{0, 0}, y1{0, 1};
  try {
    build_batch_matrix(c, y0, y1);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("(1,0)") != std::string::npos);
  }
}

TEST_CASE("deterministic Pm gives identical pairs") {
  Rng rng(3);
  auto b = labeled({0, 0, 0}, {0, 0, 0}, rng);
  BatchCouplingMatrix pm{Matrix(3, 3), b.y0, b.y1};
  pm.pm(2, 1) = 1.0;
  auto out = sample_switching_pairs(pm, b, 50, rng);
  for (std::size_t k = 0; k < 50; ++k) {
    CHECK(out.x0(k, 0) == b.x0(2, 0));
    CHECK(out.x1(k, 0) == b.x1(1, 0));
  }
}

TEST_CASE("switching sampling frequencies converge to P") {
  Rng rng(4);
  auto c = make_custom_coupling(Matrix::from_rows({{0.3, 0.1, 0.0}, {0.0, 0.2, 0.4}}), std::vector<double>{0.4, 0.6},
                                std::vector<double>{0.3, 0.3, 0.4});
  std::vector<int> y0, y1;
  for (int k = 0; k < 64; ++k) {
    y0.push_back(k % 2);
    y1.push_back(k % 3);
  }
  auto b = labeled(y0, y1, rng);
  auto pm = build_batch_matrix(c, b.y0, b.y1);
  const std::size_t n = 100000;
  auto out = sample_switching_pairs(pm, b, n, rng);
  Matrix freq(2, 3);
  for (std::size_t k = 0; k < n; ++k) freq(static_cast<std::size_t>(out.y0[k]), static_cast<std::size_t>(out.y1[k])) += 1.0 / n;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double p = c.p(i, j);
      CHECK(std::abs(freq(i, j) - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
    }
  }
}

TEST_CASE("ot resample: single point group unchanged") {
  Rng rng(5);
  auto b = labeled({0}, {0}, rng);
  auto out = ot_resample_within_groups(b, rng);
  CHECK(out.x0 == b.x0);
  CHECK(out.x1 == b.x1);
}

TEST_CASE("ot resample: 1-d groups are monotone and never cross groups") {
  Rng rng(6);
  std::vector<int> y0, y1;
  for (int k = 0; k < 60; ++k) {
    y0.push_back(k % 2);
    y1.push_back(k % 2);
  }
  auto b = labeled(y0, y1, rng);
  Matrix plan = masked_ot_plan(b);
  for (std::size_t i = 0; i < 60; ++i) {
    for (std::size_t j = 0; j < 60; ++j) {
      if (plan(i, j) > 0.0) CHECK(b.signal(i) == b.signal(j));
    }
  }
  // within a group, plan is the sorted matching
  std::vector<std::size_t> g0;
  for (std::size_t i = 0; i < 60; ++i) {
    if (b.y0[i] == 0) g0.push_back(i);
  }
  for (std::size_t a : g0) {
    for (std::size_t c : g0) {
      for (std::size_t j : g0) {
        for (std::size_t l : g0) {
          if (plan(a, j) > 0 && plan(c, l) > 0 && b.x0(a, 0) < b.x0(c, 0)) CHECK(b.x1(j, 0) <= b.x1(l, 0));
        }
      }
    }
  }
  auto out = ot_resample_within_groups(b, rng);
  CHECK(out.size() == 60);
}

TEST_CASE("K=1 pipeline reproduces plain minibatch OT") {
  Rng rng(7);
  auto b = labeled(std::vector<int>(40, 0), std::vector<int>(40, 0), rng, 2);
  Matrix plan = masked_ot_plan(b);
  std::vector<double> w(40, 1.0 / 40);
  CHECK(plan == solve_emd(w, w, squared_cost(b.x0, b.x1)).plan);
}

TEST_CASE("independent pairs") {
  Rng rng(8);
  auto b = labeled({0, 1, 1, 0, 1}, {0, 1, 1, 0, 1}, rng);
  auto single = labeled({0}, {0}, rng);
  CHECK(independent_pairs(single, rng).x1 == single.x1);
  auto out = independent_pairs(b, rng);
  CHECK(out.y0 == b.y0);
  for (std::size_t i = 0; i < 5; ++i) {
    bool found = false;
    for (std::size_t j = 0; j < 5; ++j) found |= out.x1(i, 0) == b.x1(j, 0) && b.signal(j) == b.signal(i);
    CHECK(found);
  }
}

TEST_CASE("independent pairs are uniform over the group product") {
  Rng rng(9);
  auto b = labeled({0, 0, 0}, {0, 0, 0}, rng);
  std::map<std::pair<double, double>, double> count;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    auto out = independent_pairs(b, rng);
    count[{out.x0(0, 0), out.x1(0, 0)}] += 1;
  }
  CHECK(count.size() == 3);
  double chi2 = 0.0;
  for (auto& [key, c] : count) chi2 += (c - n / 3.0) * (c - n / 3.0) / (n / 3.0);
  // chi-square with 2 dof: mean 2, sd 2
  CHECK(chi2 < 2.0 + 3.0 * 2.0);
}
