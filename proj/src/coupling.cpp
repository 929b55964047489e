#include "sfm/coupling.hpp"

#include <cmath>
#include <map>
#include <numeric>

#include "sfm/discrete_ot.hpp"
#include "sfm/error.hpp"

namespace sfm {

std::string to_string(CouplingKind kind) {
  switch (kind) {
    case CouplingKind::One2One: return "one2one";
    case CouplingKind::One2K: return "one2K";
    case CouplingKind::K2One: return "K2one";
    case CouplingKind::Mixed: return "mixed";
    case CouplingKind::Extremal: return "extremal";
    case CouplingKind::Custom: return "custom";
  }
  return "custom";
}

CouplingKind parse_coupling_kind(const std::string& s) {
  for (auto k : {CouplingKind::One2One, CouplingKind::One2K, CouplingKind::K2One, CouplingKind::Mixed,
                 CouplingKind::Extremal, CouplingKind::Custom}) {
    if (to_string(k) == s) return k;
  }
  throw Error("unknown coupling kind '" + s + "'");
}

std::size_t CouplingMatrix::positive_cells() const {
  std::size_t n = 0;
  for (double v : p.values()) n += v > 0.0 ? 1 : 0;
  return n;
}

std::vector<double> CouplingMatrix::row_cumulative(int y0) const {
  if (y0 < 0 || y0 >= k0()) throw Error("source label " + std::to_string(y0) + " out of range");
  std::vector<double> cum(p.cols());
  double s = 0.0;
  for (std::size_t j = 0; j < p.cols(); ++j) {
    s += p(static_cast<std::size_t>(y0), j);
    cum[j] = s;
  }
  if (!(s > 0.0)) throw Error("coupling row " + std::to_string(y0) + " has zero mass");
  return cum;
}

void validate(const CouplingMatrix& c) {
  if (c.p.rows() != c.rho0.size() || c.p.cols() != c.rho1.size() || c.p.empty()) {
    throw Error("coupling matrix " + c.p.shape_string() + " does not match its marginals");
  }
  check_marginal(c.rho0, "rho0");
  check_marginal(c.rho1, "rho1");
  for (double v : c.p.values()) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error("coupling matrix has a negative or non-finite entry");
  }
  for (std::size_t i = 0; i < c.p.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c.p.cols(); ++j) s += c.p(i, j);
    if (std::abs(s - c.rho0[i]) > 1e-9) {
      throw Error("coupling row " + std::to_string(i) + " sums to " + std::to_string(s) + ", rho0 is " +
                  std::to_string(c.rho0[i]));
    }
  }
  for (std::size_t j = 0; j < c.p.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.p.rows(); ++i) s += c.p(i, j);
    if (std::abs(s - c.rho1[j]) > 1e-9) {
      throw Error("coupling column " + std::to_string(j) + " sums to " + std::to_string(s) + ", rho1 is " +
                  std::to_string(c.rho1[j]));
    }
  }
}

CouplingMatrix make_coupling_matrix(CouplingKind kind, std::span<const double> rho0, std::span<const double> rho1,
                                    const Matrix* inter_cost) {
  check_marginal(rho0, "rho0");
  check_marginal(rho1, "rho1");
  CouplingMatrix c;
  c.kind = kind;
  c.rho0.assign(rho0.begin(), rho0.end());
  c.rho1.assign(rho1.begin(), rho1.end());
  const std::size_t k0 = rho0.size(), k1 = rho1.size();
  switch (kind) {
    case CouplingKind::One2One:
      if (k0 != 1 || k1 != 1) throw Error("one2one coupling requires K0 = K1 = 1");
      [[fallthrough]];
    case CouplingKind::Mixed:
      c.p = Matrix(k0, k1);
      for (std::size_t i = 0; i < k0; ++i) {
        for (std::size_t j = 0; j < k1; ++j) c.p(i, j) = rho0[i] * rho1[j];
      }
      break;
    case CouplingKind::One2K:
      if (k0 != 1) throw Error("one2K coupling requires K0 = 1");
      c.p = Matrix(1, k1, std::vector<double>(rho1.begin(), rho1.end()));
      break;
    case CouplingKind::K2One:
      if (k1 != 1) throw Error("K2one coupling requires K1 = 1");
      c.p = Matrix(k0, 1, std::vector<double>(rho0.begin(), rho0.end()));
      break;
    case CouplingKind::Extremal: {
      if (inter_cost == nullptr) throw Error("extremal coupling needs an inter-cluster cost");
      c.p = solve_emd(rho0, rho1, *inter_cost).plan;
      break;
    }
    case CouplingKind::Custom:
      throw Error("custom coupling needs an explicit matrix");
  }
  validate(c);
  return c;
}

CouplingMatrix make_custom_coupling(const Matrix& p, std::span<const double> rho0, std::span<const double> rho1) {
  CouplingMatrix c{p, {rho0.begin(), rho0.end()}, {rho1.begin(), rho1.end()}, CouplingKind::Custom};
  validate(c);
  return c;
}

Matrix inter_cluster_cost(const std::vector<std::vector<double>>& means0,
                          const std::vector<std::vector<double>>& means1, ClusterCost kind) {
  Matrix c(means0.size(), means1.size(), 1.0);
  if (kind == ClusterCost::MeanDistance) {
    for (std::size_t i = 0; i < means0.size(); ++i) {
      for (std::size_t j = 0; j < means1.size(); ++j) c(i, j) = squared_distance(means0[i], means1[j]);
    }
  }
  return c;
}

LabeledBatch make_batch(const LabeledPoints& source, const LabeledPoints& target) {
  if (source.labels.size() != target.labels.size()) throw Error("source and target batches differ in size");
  return {source.points, target.points, source.labels, target.labels};
}

BatchCouplingMatrix build_batch_matrix(const CouplingMatrix& c, std::span<const int> y0, std::span<const int> y1) {
  const auto k0 = static_cast<std::size_t>(c.k0()), k1 = static_cast<std::size_t>(c.k1());
  std::vector<double> c0(k0, 0.0), c1(k1, 0.0);
  for (int y : y0) {
    if (y < 0 || static_cast<std::size_t>(y) >= k0) throw Error("source label out of range for P");
    c0[static_cast<std::size_t>(y)] += 1.0;
  }
  for (int y : y1) {
    if (y < 0 || static_cast<std::size_t>(y) >= k1) throw Error("target label out of range for P");
    c1[static_cast<std::size_t>(y)] += 1.0;
  }
  // Count(a, b) = c0(a) * c1(b) index pairs carry labels (a, b)
  for (std::size_t a = 0; a < k0; ++a) {
    for (std::size_t b = 0; b < k1; ++b) {
      if (c.p(a, b) > 0.0 && c0[a] * c1[b] == 0.0) {
        throw Error("batch does not represent coupling cell (" + std::to_string(a) + "," + std::to_string(b) + ")");
      }
    }
  }
  BatchCouplingMatrix out{Matrix(y0.size(), y1.size()), {y0.begin(), y0.end()}, {y1.begin(), y1.end()}};
  for (std::size_t i = 0; i < y0.size(); ++i) {
    const auto a = static_cast<std::size_t>(y0[i]);
    for (std::size_t j = 0; j < y1.size(); ++j) {
      const auto b = static_cast<std::size_t>(y1[j]);
      out.pm(i, j) = c.p(a, b) / (c0[a] * c1[b]);
    }
  }
  return out;
}

LabeledBatch sample_switching_pairs(const BatchCouplingMatrix& pm, const LabeledBatch& batch, std::size_t n,
                                    Rng& rng) {
  if (pm.pm.rows() != batch.x0.rows() || pm.pm.cols() != batch.x1.rows()) {
    throw Error("batch coupling matrix " + pm.pm.shape_string() + " does not match the batch");
  }
  std::vector<double> cum(pm.pm.size());
  std::partial_sum(pm.pm.values().begin(), pm.pm.values().end(), cum.begin());
  const std::size_t m1 = pm.pm.cols();
  std::vector<std::size_t> rows(n), cols(n);
  LabeledBatch out;
  out.y0.resize(n);
  out.y1.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t cell = rng.from_cumulative(cum);
    rows[k] = cell / m1;
    cols[k] = cell % m1;
    out.y0[k] = batch.y0[rows[k]];
    out.y1[k] = batch.y1[cols[k]];
  }
  out.x0 = batch.x0.gather_rows(rows);
  out.x1 = batch.x1.gather_rows(cols);
  return out;
}

namespace {

std::map<SwitchSignal, std::vector<std::size_t>> groups_of(const LabeledBatch& batch) {
  std::map<SwitchSignal, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < batch.size(); ++i) groups[batch.signal(i)].push_back(i);
  return groups;
}

}  // namespace

Matrix masked_ot_plan(const LabeledBatch& batch) {
  const std::size_t n = batch.size();
  if (n == 0) throw Error("cannot resample an empty batch");
  Matrix plan(n, n);
  for (const auto& [sig, idx] : groups_of(batch)) {
    if (idx.empty()) throw Error("empty switching group");
    const Matrix g0 = batch.x0.gather_rows(idx), g1 = batch.x1.gather_rows(idx);
    std::vector<double> w(idx.size(), 1.0 / static_cast<double>(idx.size()));
    const Matrix gp = solve_emd(w, w, squared_cost(g0, g1)).plan;
    const double mass = static_cast<double>(idx.size()) / static_cast<double>(n);
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = 0; b < idx.size(); ++b) plan(idx[a], idx[b]) = mass * gp(a, b);
    }
  }
  return plan;
}

LabeledBatch ot_resample_within_groups(const LabeledBatch& batch, Rng& rng) {
  const Matrix plan = masked_ot_plan(batch);
  BatchCouplingMatrix pm{plan, batch.y0, batch.y1};
  return sample_switching_pairs(pm, batch, batch.size(), rng);
}

LabeledBatch independent_pairs(const LabeledBatch& batch, Rng& rng) {
  std::vector<std::size_t> perm(batch.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (const auto& [sig, idx] : groups_of(batch)) {
    std::vector<std::size_t> shuffled = idx;
    for (std::size_t k = shuffled.size(); k > 1; --k) std::swap(shuffled[k - 1], shuffled[rng.below(k)]);
    for (std::size_t a = 0; a < idx.size(); ++a) perm[idx[a]] = shuffled[a];
  }
  LabeledBatch out = batch;
  out.x1 = batch.x1.gather_rows(perm);
  return out;
}

}  // namespace sfm
