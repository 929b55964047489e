#include "sfm/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sfm/error.hpp"

namespace sfm {

int ClusterModel::nearest(std::span<const double> x) const {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const double d = squared_distance(x, centers.row(c));
    if (d < bd) {
      bd = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::vector<int> ClusterModel::assign(const Matrix& points) const {
  if (points.cols() != centers.cols()) throw Error("points do not match cluster dimension");
  std::vector<int> labels(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) labels[i] = nearest(points.row(i));
  return labels;
}

ClusterModel ClusterModel::project(std::size_t first, std::size_t count) const {
  if (first + count > centers.cols()) throw Error("projection outside cluster dimension");
  ClusterModel out;
  out.centers = Matrix(centers.rows(), count);
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    for (std::size_t k = 0; k < count; ++k) out.centers(c, k) = centers(c, first + k);
  }
  return out;
}

namespace {

Matrix seed_plus_plus(const Matrix& pts, int k, Rng& rng) {
  const std::size_t n = pts.rows();
  Matrix centers(static_cast<std::size_t>(k), pts.cols());
  std::size_t first = rng.below(n);
  std::copy(pts.row(first).begin(), pts.row(first).end(), centers.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(pts.row(i), centers.row(0));
  std::vector<double> cum(n);
  for (int c = 1; c < k; ++c) {
    std::partial_sum(d2.begin(), d2.end(), cum.begin());
    // all points coincide with chosen centers: fall back to a uniform draw
    const std::size_t pick = cum.back() > 0.0 ? rng.from_cumulative(cum) : rng.below(n);
    std::copy(pts.row(pick).begin(), pts.row(pick).end(), centers.row(static_cast<std::size_t>(c)).begin());
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(pts.row(i), centers.row(static_cast<std::size_t>(c))));
    }
  }
  return centers;
}

double inertia_of(const Matrix& pts, const Matrix& centers, const std::vector<int>& labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    s += squared_distance(pts.row(i), centers.row(static_cast<std::size_t>(labels[i])));
  }
  return s;
}

KMeansResult lloyd(const Matrix& pts, Matrix centers, int max_iter) {
  KMeansResult r;
  r.model.centers = std::move(centers);
  const std::size_t k = r.model.centers.rows(), d = pts.cols();
  r.labels = r.model.assign(pts);
  r.inertia_trace.push_back(inertia_of(pts, r.model.centers, r.labels));
  for (int it = 0; it < max_iter; ++it) {
    Matrix sums(k, d);
    std::vector<double> counts(k, 0.0);
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      const auto c = static_cast<std::size_t>(r.labels[i]);
      counts[c] += 1.0;
      for (std::size_t j = 0; j < d; ++j) sums(c, j) += pts(i, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0.0) continue;  // empty cluster keeps its center
      for (std::size_t j = 0; j < d; ++j) r.model.centers(c, j) = sums(c, j) / counts[c];
    }
    auto next = r.model.assign(pts);
    const bool stable = next == r.labels;
    r.labels = std::move(next);
    r.inertia_trace.push_back(inertia_of(pts, r.model.centers, r.labels));
    if (stable) break;
  }
  r.model.inertia = r.inertia_trace.back();
  return r;
}

void canonical_order(KMeansResult& r) {
  const std::size_t k = r.model.centers.rows();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ra = r.model.centers.row(a), rb = r.model.centers.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  std::vector<int> relabel(k);
  for (std::size_t pos = 0; pos < k; ++pos) relabel[order[pos]] = static_cast<int>(pos);
  r.model.centers = r.model.centers.gather_rows(order);
  for (int& l : r.labels) l = relabel[static_cast<std::size_t>(l)];
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, Rng& rng, int max_iter, int n_restarts) {
  if (k < 1) throw Error("kmeans needs K >= 1");
  if (points.rows() < static_cast<std::size_t>(k)) {
    throw Error("kmeans needs at least K points (n=" + std::to_string(points.rows()) + ", K=" + std::to_string(k) + ")");
  }
  if (n_restarts < 1 || max_iter < 0) throw Error("kmeans needs n_restarts >= 1 and max_iter >= 0");
  KMeansResult best;
  bool have = false;
  for (int r = 0; r < n_restarts; ++r) {
    auto res = lloyd(points, seed_plus_plus(points, k, rng), max_iter);
    if (!have || res.model.inertia < best.model.inertia) {
      best = std::move(res);
      have = true;
    }
  }
  canonical_order(best);
  return best;
}

JointClustering joint_cluster(const Matrix& x0, const Matrix& x1, int k, Rng& rng) {
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols()) throw Error("joint clustering needs paired point sets");
  const std::size_t n = x0.rows(), d = x0.cols();
  Matrix joint(n, 2 * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      joint(i, j) = x0(i, j);
      joint(i, d + j) = x1(i, j);
    }
  }
  auto km = kmeans(joint, k, rng);
  std::vector<double> mass(static_cast<std::size_t>(k), 0.0);
  for (int l : km.labels) mass[static_cast<std::size_t>(l)] += 1.0;
  for (double& v : mass) v /= static_cast<double>(n);
  for (std::size_t c = 0; c < mass.size(); ++c) {
    if (mass[c] == 0.0) throw Error("joint clustering produced an empty cluster " + std::to_string(c));
  }
  Matrix p(mass.size(), mass.size());
  for (std::size_t c = 0; c < mass.size(); ++c) p(c, c) = mass[c];
  // rows and columns of a diagonal P sum to the same masses by construction
  CouplingMatrix coupling{p, mass, mass, CouplingKind::Custom};
  double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw Error("joint cluster masses do not sum to 1");
  return {std::move(km.model), std::move(km.labels), std::move(coupling)};
}

}  // namespace sfm
