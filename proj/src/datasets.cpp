#include "sfm/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "sfm/error.hpp"
#include "sfm/text.hpp"

namespace sfm {

namespace {

void check_same_dim(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.empty() || p.size() != q.size()) throw Error("mode endpoints must share a nonzero dimension");
}

}  // namespace

Mode Mode::gaussian(double w, std::vector<double> mean, std::vector<double> std) {
  check_same_dim(mean, std);
  for (double s : std) {
    if (!(s >= 0.0)) throw Error("gaussian std must be nonnegative");
  }
  return Mode{w, ShapeKind::Gaussian, std::move(mean), std::move(std)};
}

Mode Mode::box(double w, std::vector<double> lo, std::vector<double> hi) {
  check_same_dim(lo, hi);
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (!(lo[k] <= hi[k])) throw Error("box lower corner exceeds upper corner");
  }
  return Mode{w, ShapeKind::Box, std::move(lo), std::move(hi)};
}

Mode Mode::dirac(double w, std::vector<double> point) {
  if (point.empty()) throw Error("dirac point must have nonzero dimension");
  return Mode{w, ShapeKind::Dirac, std::move(point), {}};
}

Mode Mode::segment(double w, std::vector<double> p, std::vector<double> q) {
  check_same_dim(p, q);
  return Mode{w, ShapeKind::Segment, std::move(p), std::move(q)};
}

std::vector<double> Mode::mean() const {
  switch (kind) {
    case ShapeKind::Gaussian:
    case ShapeKind::Dirac:
      return a;
    case ShapeKind::Box:
    case ShapeKind::Segment: {
      std::vector<double> m(a.size());
      for (std::size_t k = 0; k < a.size(); ++k) m[k] = 0.5 * (a[k] + b[k]);
      return m;
    }
  }
  return a;
}

void Mode::draw(Rng& rng, std::span<double> out) const {
  switch (kind) {
    case ShapeKind::Gaussian:
      for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] + b[k] * rng.normal();
      break;
    case ShapeKind::Box:
      for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] == b[k] ? a[k] : rng.uniform(a[k], b[k]);
      break;
    case ShapeKind::Dirac:
      std::copy(a.begin(), a.end(), out.begin());
      break;
    case ShapeKind::Segment: {
      const double u = rng.uniform();
      for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] == b[k] ? a[k] : a[k] + u * (b[k] - a[k]);
      break;
    }
  }
}

bool Mode::contains(std::span<const double> x, double tol) const {
  switch (kind) {
    case ShapeKind::Gaussian:
      for (std::size_t k = 0; k < a.size(); ++k) {
        if (std::abs(x[k] - a[k]) > 6.0 * b[k] + tol) return false;
      }
      return true;
    case ShapeKind::Box:
      for (std::size_t k = 0; k < a.size(); ++k) {
        if (x[k] < a[k] - tol || x[k] > b[k] + tol) return false;
      }
      return true;
    case ShapeKind::Dirac:
      for (std::size_t k = 0; k < a.size(); ++k) {
        if (std::abs(x[k] - a[k]) > tol) return false;
      }
      return true;
    case ShapeKind::Segment: {
      // distance from x to the segment
      double len2 = 0.0, dot = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        len2 += (b[k] - a[k]) * (b[k] - a[k]);
        dot += (x[k] - a[k]) * (b[k] - a[k]);
      }
      const double u = len2 > 0.0 ? std::clamp(dot / len2, 0.0, 1.0) : 0.0;
      double d2 = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double p = a[k] + u * (b[k] - a[k]);
        d2 += (x[k] - p) * (x[k] - p);
      }
      return std::sqrt(d2) <= tol;
    }
  }
  return false;
}

std::optional<double> Mode::log_density(std::span<const double> x) const {
  if (kind == ShapeKind::Gaussian) {
    double lp = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (b[k] <= 0.0) return std::nullopt;
      const double z = (x[k] - a[k]) / b[k];
      lp += -0.5 * z * z - std::log(b[k]) - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    return lp;
  }
  if (kind == ShapeKind::Box) {
    double lp = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (b[k] <= a[k]) return std::nullopt;
      if (x[k] < a[k] || x[k] > b[k]) return -std::numeric_limits<double>::infinity();
      lp -= std::log(b[k] - a[k]);
    }
    return lp;
  }
  return std::nullopt;
}

LabeledSampler::LabeledSampler(std::string name, std::vector<Mode> modes)
    : name_(std::move(name)), modes_(std::move(modes)) {
  if (modes_.empty()) throw Error("sampler '" + name_ + "' has no modes");
  dim_ = modes_.front().dim();
  double total = 0.0;
  for (const auto& m : modes_) {
    if (m.dim() != dim_) throw Error("sampler '" + name_ + "' mixes mode dimensions");
    if (!(m.weight > 0.0)) throw Error("sampler '" + name_ + "' has a non-positive mode weight");
    total += m.weight;
    cumulative_.push_back(total);
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error("sampler '" + name_ + "' weights sum to " + std::to_string(total) + ", expected 1");
  }
}

std::vector<double> LabeledSampler::weights() const {
  std::vector<double> w;
  for (const auto& m : modes_) w.push_back(m.weight);
  return w;
}

LabeledPoints LabeledSampler::sample(std::size_t m, Rng& rng) const {
  LabeledPoints out{Matrix(m, dim_), std::vector<int>(m, 0)};
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t k = modes_.size() == 1 ? 0 : rng.from_cumulative(cumulative_);
    out.labels[i] = static_cast<int>(k);
    modes_[k].draw(rng, out.points.row(i));
  }
  return out;
}

int LabeledSampler::support_label(std::span<const double> x, double tol) const {
  for (std::size_t k = 0; k < modes_.size(); ++k) {
    if (modes_[k].contains(x, tol)) return static_cast<int>(k);
  }
  return -1;
}

std::optional<double> LabeledSampler::log_density(std::span<const double> x) const {
  std::vector<double> terms;
  for (const auto& m : modes_) {
    auto lp = m.log_density(x);
    if (!lp) return std::nullopt;
    terms.push_back(std::log(m.weight) + *lp);
  }
  double hi = -std::numeric_limits<double>::infinity();
  for (double t : terms) hi = std::max(hi, t);
  if (std::isinf(hi)) return hi;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - hi);
  return hi + std::log(s);
}

DatasetPair make_prop1(double a, double b) {
  if (!(b >= 0.0) || !(a > b)) throw Error("prop1 requires a > b >= 0");
  LabeledSampler src("prop1-source", {Mode::box(1.0, {-2 * b}, {2 * b})});
  LabeledSampler tgt("prop1-target", {Mode::box(0.5, {-a - b}, {-a + b}), Mode::box(0.5, {a - b}, {a + b})});
  return {std::move(src), std::move(tgt)};
}

DatasetPair make_prop2(double a, double b) {
  if (!(b >= 0.0) || !(a > b)) throw Error("prop2 requires a > b >= 0");
  LabeledSampler src("prop2-source",
                     {Mode::box(2.0 / 3.0, {-a - b}, {-a + b}), Mode::box(1.0 / 3.0, {3 * a - b}, {3 * a})});
  LabeledSampler tgt("prop2-target",
                     {Mode::box(1.0 / 3.0, {-3 * a}, {-3 * a + b}), Mode::box(2.0 / 3.0, {a - b}, {a + b})});
  return {std::move(src), std::move(tgt)};
}

DatasetPair make_prop3() {
  LabeledSampler src("prop3-source", {Mode::segment(1.0, {0.0, -1.0}, {0.0, 1.0})});
  LabeledSampler tgt("prop3-target",
                     {Mode::segment(0.5, {-1.0, -1.0}, {-1.0, 1.0}), Mode::segment(0.5, {1.0, -1.0}, {1.0, 1.0})});
  return {std::move(src), std::move(tgt)};
}

DatasetPair make_8gauss_checkerboard(double scale, double sigma) {
  if (!(scale > 0.0) || !(sigma > 0.0)) throw Error("8gauss-checkerboard requires scale > 0 and sigma > 0");
  std::vector<Mode> gauss;
  for (int k = 0; k < 8; ++k) {
    const double ang = 2.0 * std::numbers::pi * k / 8.0;
    gauss.push_back(Mode::gaussian(0.125, {scale * std::cos(ang), scale * std::sin(ang)}, {sigma, sigma}));
  }
  // 4x4 grid over [-scale, scale]^2, cells with even (i + j) filled
  std::vector<Mode> cells;
  const double side = scale / 2.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if ((i + j) % 2 != 0) continue;
      const double x0 = -scale + side * i, y0 = -scale + side * j;
      cells.push_back(Mode::box(0.125, {x0, y0}, {x0 + side, y0 + side}));
    }
  }
  return {LabeledSampler("8gaussians", std::move(gauss)), LabeledSampler("checkerboard", std::move(cells))};
}

DatasetPair make_gmm2(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error("gmm2 requires a > 0 and b > 0");
  LabeledSampler src("gmm2-source", {Mode::gaussian(0.5, {-a}, {b}), Mode::gaussian(0.5, {a}, {b})});
  LabeledSampler tgt("gmm2-target",
                     {Mode::gaussian(1.0 / 3.0, {-a}, {b}), Mode::gaussian(2.0 / 3.0, {a}, {b})});
  return {std::move(src), std::move(tgt)};
}

void write_samples_csv(std::ostream& os, const LabeledPoints& pts) {
  for (std::size_t k = 0; k < pts.points.cols(); ++k) os << "x_" << k + 1 << ',';
  os << "label\n";
  for (std::size_t i = 0; i < pts.points.rows(); ++i) {
    for (double v : pts.points.row(i)) os << format_real(v) << ',';
    os << pts.labels[i] << '\n';
  }
}

}  // namespace sfm
