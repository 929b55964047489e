#pragma once

#include <span>
#include <vector>

#include "sfm/coupling.hpp"
#include "sfm/matrix.hpp"
#include "sfm/rng.hpp"

namespace sfm {

/// Nearest-center partition. Centers are kept in lexicographic order so the
/// labelling of a partition does not depend on restart order.
struct ClusterModel {
  Matrix centers;  // (K x d)
  double inertia = 0.0;

  int k() const { return static_cast<int>(centers.rows()); }
  int nearest(std::span<const double> x) const;
  std::vector<int> assign(const Matrix& points) const;
  /// Model restricted to columns [first, first + count) of the centers.
  ClusterModel project(std::size_t first, std::size_t count) const;
};

struct KMeansResult {
  ClusterModel model;
  std::vector<int> labels;
  std::vector<double> inertia_trace;  // per Lloyd iteration, best restart
};

/// k-means++ seeding, Lloyd iterations, best of n_restarts by inertia.
KMeansResult kmeans(const Matrix& points, int k, Rng& rng, int max_iter = 100, int n_restarts = 8);

struct JointClustering {
  ClusterModel model;       // centers in (x0, x1) space
  std::vector<int> labels;  // shared by both endpoints of a pair
  CouplingMatrix coupling;  // diag(cluster mass fractions)
};

/// k-means on concatenated (x0, x1) pairs; P is diagonal.
JointClustering joint_cluster(const Matrix& x0, const Matrix& x1, int k, Rng& rng);

}  // namespace sfm
