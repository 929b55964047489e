#pragma once

// Helpers shared by unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sfm/autodiff.hpp"
#include "sfm/matrix.hpp"
#include "sfm/model.hpp"
#include "sfm/rng.hpp"

namespace sfm::testing {

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

/// Relative error with an absolute floor, as used by the gradient checks.
inline double rel_error(double got, double want) {
  return std::abs(got - want) / std::max({std::abs(got), std::abs(want), 1e-6});
}

struct MlpCase {
  Matrix x, y;
  std::vector<Matrix> params;  // w0, b0, w1, b1, w2, b2
};

inline MlpCase random_mlp(Rng& rng, std::size_t d_in, std::size_t hidden, std::size_t d_out, std::size_t batch) {
  MlpCase c;
  c.x = random_matrix(batch, d_in, rng);
  c.y = random_matrix(batch, d_out, rng);
  const std::size_t widths[] = {d_in, hidden, hidden, d_out};
  for (int l = 0; l < 3; ++l) {
    c.params.push_back(random_matrix(widths[l], widths[l + 1], rng, -1.0, 1.0));
    c.params.push_back(random_matrix(1, widths[l + 1], rng, -1.0, 1.0));
  }
  return c;
}

inline ad::Value mlp_loss(ad::Tape& tape, const MlpCase& c, std::vector<ad::Value>& leaves) {
  leaves.clear();
  for (const auto& p : c.params) leaves.push_back(tape.leaf(p));
  ad::Value h = tape.constant(c.x);
  for (int l = 0; l < 3; ++l) {
    h = ad::add_bias(ad::matmul(h, leaves[2 * l]), leaves[2 * l + 1]);
    if (l < 2) h = ad::selu(h);
  }
  return ad::squared_error_mean(h, tape.constant(c.y));
}

/// Worst elementwise relative error between reverse-mode and central-difference gradients.
inline double mlp_gradient_error(MlpCase c, double h = 1e-5) {
  ad::Tape tape;
  std::vector<ad::Value> leaves;
  auto root = mlp_loss(tape, c, leaves);
  auto grads = ad::backward(tape, root);
  double worst = 0.0;
  for (std::size_t p = 0; p < c.params.size(); ++p) {
    const Matrix g = grads.at(leaves[p]);
    for (std::size_t k = 0; k < c.params[p].size(); ++k) {
      const double keep = c.params[p].values()[k];
      auto eval = [&](double v) {
        c.params[p].values()[k] = v;
        ad::Tape t;
        std::vector<ad::Value> l;
        return mlp_loss(t, c, l).scalar();
      };
      const double fd = (eval(keep + h) - eval(keep - h)) / (2.0 * h);
      c.params[p].values()[k] = keep;
      worst = std::max(worst, rel_error(g.values()[k], fd));
    }
  }
  return worst;
}

/// A model with every parameter (output layer included) drawn from U(-scale, scale).
inline VectorFieldModel random_model(const ModelSpec& spec, Rng& rng, double scale = 0.5) {
  VectorFieldModel m(spec, rng);
  for (Matrix* p : m.parameters()) {
    for (double& v : p->values()) v = rng.uniform(-scale, scale);
  }
  return m;
}

}  // namespace sfm::testing
