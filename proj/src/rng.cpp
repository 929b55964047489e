#include "sfm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sfm/error.hpp"

namespace sfm {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error("Rng::below called with n = 0");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::size_t Rng::from_cumulative(std::span<const double> cumulative) {
  const double u = uniform() * cumulative.back();
  // upper_bound never lands on a zero-mass cell: its cumulative value equals the previous one.
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it != cumulative.end()) return static_cast<std::size_t>(it - cumulative.begin());
  // Rounding pushed u to the total; take the last cell with positive mass.
  std::size_t k = cumulative.size() - 1;
  while (k > 0 && cumulative[k] == cumulative[k - 1]) --k;
  return k;
}

}  // namespace sfm
