#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfm/matrix.hpp"
#include "sfm/rng.hpp"

namespace sfm {

enum class ShapeKind { Gaussian, Box, Dirac, Segment };

/// One mixture component. Field meaning depends on kind:
///   Gaussian: a = mean, b = per-coordinate std (diagonal)
///   Box:      a = lower corner, b = upper corner (zero width allowed)
///   Dirac:    a = point
///   Segment:  a, b = endpoints
struct Mode {
  double weight = 1.0;
  ShapeKind kind = ShapeKind::Dirac;
  std::vector<double> a;
  std::vector<double> b;

  static Mode gaussian(double w, std::vector<double> mean, std::vector<double> std);
  static Mode box(double w, std::vector<double> lo, std::vector<double> hi);
  static Mode dirac(double w, std::vector<double> point);
  static Mode segment(double w, std::vector<double> p, std::vector<double> q);

  std::size_t dim() const { return a.size(); }
  std::vector<double> mean() const;
  void draw(Rng& rng, std::span<double> out) const;
  /// Support membership; Gaussians use a 6-sigma box.
  bool contains(std::span<const double> x, double tol = 1e-12) const;
  /// Log-density w.r.t. Lebesgue measure; only for Gaussians and full-width boxes.
  std::optional<double> log_density(std::span<const double> x) const;
};

struct LabeledPoints {
  Matrix points;
  std::vector<int> labels;
};

class LabeledSampler {
 public:
  LabeledSampler(std::string name, std::vector<Mode> modes);

  const std::string& name() const { return name_; }
  std::size_t dim() const { return dim_; }
  const std::vector<Mode>& modes() const { return modes_; }
  int mode_count() const { return static_cast<int>(modes_.size()); }
  std::vector<double> weights() const;

  /// m i.i.d. draws, each tagged with the mode that produced it.
  LabeledPoints sample(std::size_t m, Rng& rng) const;

  /// Index of the first mode whose support holds x, or -1.
  int support_label(std::span<const double> x, double tol = 1e-9) const;
  /// Mixture log-density; empty when some mode has no Lebesgue density.
  std::optional<double> log_density(std::span<const double> x) const;

 private:
  std::string name_;
  std::size_t dim_ = 0;
  std::vector<Mode> modes_;
  std::vector<double> cumulative_;
};

struct DatasetPair {
  LabeledSampler source;
  LabeledSampler target;
};

/// q0 = U(-2b, 2b); q1 = 1/2 U(-a-b, -a+b) + 1/2 U(a-b, a+b).
DatasetPair make_prop1(double a, double b);
/// q0 = 2/3 U(-a-b, -a+b) + 1/3 U(3a-b, 3a); q1 = 1/3 U(-3a, -3a+b) + 2/3 U(a-b, a+b).
DatasetPair make_prop2(double a, double b);
/// Vertical unit segment at x=0 to the two lines x = -1 and x = 1.
DatasetPair make_prop3();
/// Eight Gaussians on a circle of radius `scale` to eight checkerboard cells of side scale/2.
DatasetPair make_8gauss_checkerboard(double scale, double sigma);
/// 1-d: 1/2 N(-a, b^2) + 1/2 N(a, b^2) to 1/3 N(-a, b^2) + 2/3 N(a, b^2).
DatasetPair make_gmm2(double a, double b);

/// Sample dump: header x_1..x_d,label then one row per point.
void write_samples_csv(std::ostream& os, const LabeledPoints& pts);

}  // namespace sfm
