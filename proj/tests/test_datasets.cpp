#include <cmath>

#include "doctest.h"
#include "sfm/datasets.hpp"
#include "sfm/error.hpp"

using namespace sfm;

namespace {

std::vector<double> label_freq(const LabeledPoints& p, int k) {
  std::vector<double> f(static_cast<std::size_t>(k), 0.0);
  for (int l : p.labels) f[static_cast<std::size_t>(l)] += 1.0;
  for (double& v : f) v /= static_cast<double>(p.labels.size());
  return f;
}

double binom_sigma(double p, double n) { return std::sqrt(p * (1 - p) / n); }

}  // namespace

TEST_CASE("dirac sampler") {
  LabeledSampler s("dirac", {Mode::dirac(1.0, {0.0})});
  Rng rng(1);
  auto p = s.sample(100, rng);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(p.points(i, 0) == 0.0);
    CHECK(p.labels[i] == 0);
  }
}

TEST_CASE("weights must sum to one") {
  CHECK_THROWS_AS(LabeledSampler("bad", {Mode::dirac(0.5, {0.0})}), Error);
  CHECK_THROWS_AS(LabeledSampler("bad", {Mode::dirac(1.0, {0.0}), Mode::dirac(0.0, {1.0})}), Error);
}

TEST_CASE("two diracs: label frequency") {
  LabeledSampler s("two", {Mode::dirac(0.5, {-1.0}), Mode::dirac(0.5, {1.0})});
  Rng rng(2);
  auto p = s.sample(10000, rng);
  CHECK(std::abs(label_freq(p, 2)[0] - 0.5) < 3 * std::sqrt(0.25 / 1e4));
}

TEST_CASE("prop1") {
  auto [src, tgt] = make_prop1(4.0, 1.0);
  CHECK(tgt.modes()[0].a[0] == -5.0);
  CHECK(tgt.modes()[0].b[0] == -3.0);
  CHECK(tgt.modes()[1].a[0] == 3.0);
  CHECK(tgt.modes()[1].b[0] == 5.0);
  Rng rng(3);
  auto x = src.sample(10000, rng);
  double mean = 0.0;
  for (double v : x.points.values()) mean += v;
  mean /= 1e4;
  const double sd = 4.0 / std::sqrt(12.0);
  CHECK(std::abs(mean) < 3 * sd / 100.0);
  auto y = tgt.sample(1000, rng);
  for (std::size_t i = 0; i < 1000; ++i) {
    if (y.labels[i] == 0) CHECK(y.points(i, 0) <= -3.0);
    CHECK(tgt.support_label(y.points.row(i)) == y.labels[i]);
  }
  CHECK_THROWS_AS(make_prop1(1.0, 1.0), Error);
}

TEST_CASE("prop1 with b = 0 is the Dirac corollary case") {
  auto [src, tgt] = make_prop1(1.0, 0.0);
  Rng rng(4);
  auto x = src.sample(10, rng);
  auto y = tgt.sample(50, rng);
  for (double v : x.points.values()) CHECK(v == 0.0);
  for (double v : y.points.values()) CHECK(std::abs(v) == 1.0);
}

TEST_CASE("prop2") {
  auto [src, tgt] = make_prop2(3.0, 0.3);
  double w = 0.0;
  for (double v : src.weights()) w += v;
  CHECK(w == doctest::Approx(1.0));
  CHECK(tgt.modes()[0].a[0] == -9.0);
  CHECK(tgt.modes()[0].b[0] == doctest::Approx(-8.7));
  Rng rng(5);
  auto x = src.sample(10000, rng);
  CHECK(std::abs(label_freq(x, 2)[0] - 2.0 / 3.0) < 3 * binom_sigma(2.0 / 3.0, 1e4));
  CHECK_THROWS_AS(make_prop2(0.2, 0.3), Error);
}

TEST_CASE("prop3") {
  auto [src, tgt] = make_prop3();
  Rng rng(6);
  auto x = src.sample(1000, rng);
  for (std::size_t i = 0; i < 1000; ++i) CHECK(x.points(i, 0) == 0.0);
  auto y = tgt.sample(10000, rng);
  CHECK(std::abs(label_freq(y, 2)[0] - 0.5) < 3 * binom_sigma(0.5, 1e4));
  for (std::size_t i = 0; i < 10000; ++i) {
    CHECK(std::abs(y.points(i, 0)) == 1.0);
    CHECK(y.points(i, 0) == (y.labels[i] == 0 ? -1.0 : 1.0));
  }
}

TEST_CASE("8 gaussians and checkerboard") {
  auto [src, tgt] = make_8gauss_checkerboard(2.0, 0.25);
  CHECK(src.mode_count() == 8);
  CHECK(tgt.mode_count() == 8);
  for (int i = 0; i < 8; ++i) {
    for (int j = i + 1; j < 8; ++j) CHECK(src.modes()[i].a != src.modes()[j].a);
  }
  Rng rng(7);
  auto x = src.sample(10000, rng);
  for (double f : label_freq(x, 8)) CHECK(std::abs(f - 0.125) < 3 * binom_sigma(0.125, 1e4));
  for (std::size_t i = 0; i < 10000; ++i) {
    CHECK(src.modes()[static_cast<std::size_t>(x.labels[i])].contains(x.points.row(i)));
  }
  auto y = tgt.sample(5000, rng);
  for (std::size_t i = 0; i < 5000; ++i) {
    CHECK(tgt.modes()[static_cast<std::size_t>(y.labels[i])].contains(y.points.row(i)));
  }
}

TEST_CASE("log densities") {
  auto [src, tgt] = make_gmm2(2.0, 0.5);
  std::vector<double> x{0.3};
  const double want = std::log(0.5 * std::exp(-0.5 * std::pow(2.3 / 0.5, 2)) / (0.5 * std::sqrt(2 * M_PI)) +
                               0.5 * std::exp(-0.5 * std::pow(1.7 / 0.5, 2)) / (0.5 * std::sqrt(2 * M_PI)));
  CHECK(*src.log_density(x) == doctest::Approx(want).epsilon(1e-12));
  auto [p1s, p1t] = make_prop1(2.0, 0.5);
  CHECK(*p1s.log_density(x) == doctest::Approx(-std::log(2.0)));
  CHECK(!make_prop3().source.log_density(std::vector<double>{0.0, 0.0}).has_value());
}

TEST_CASE("sampling is a pure function of the stream") {
  auto [src, tgt] = make_8gauss_checkerboard(2.0, 0.25);
  Rng a(8), b(8);
  auto p = tgt.sample(100, a);
  auto q = tgt.sample(100, b);
  CHECK(p.points == q.points);
  CHECK(p.labels == q.labels);
}
