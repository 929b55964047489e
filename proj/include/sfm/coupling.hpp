#pragma once

#include <span>
#include <string>
#include <vector>

#include "sfm/datasets.hpp"
#include "sfm/matrix.hpp"
#include "sfm/model.hpp"
#include "sfm/rng.hpp"

namespace sfm {

enum class CouplingKind { One2One, One2K, K2One, Mixed, Extremal, Custom };

std::string to_string(CouplingKind kind);
CouplingKind parse_coupling_kind(const std::string& s);

/// K0 x K1 switching coupling with cluster-mass marginals rho0, rho1.
struct CouplingMatrix {
  Matrix p;
  std::vector<double> rho0;
  std::vector<double> rho1;
  CouplingKind kind = CouplingKind::Custom;

  int k0() const { return static_cast<int>(p.rows()); }
  int k1() const { return static_cast<int>(p.cols()); }
  std::size_t positive_cells() const;
  /// P(y1 | y0) as cumulative sums over y1.
  std::vector<double> row_cumulative(int y0) const;
};

/// Marginals, nonnegativity and shape, tolerance 1e-9.
void validate(const CouplingMatrix& c);

/// mixed: outer product; extremal: EMD vertex for the given inter-cluster cost;
/// one2one / one2K / K2one: the unique coupling of that shape.
CouplingMatrix make_coupling_matrix(CouplingKind kind, std::span<const double> rho0,
                                    std::span<const double> rho1, const Matrix* inter_cost = nullptr);
/// Explicit P; marginals are checked against rho0 / rho1.
CouplingMatrix make_custom_coupling(const Matrix& p, std::span<const double> rho0, std::span<const double> rho1);

enum class ClusterCost { MeanDistance, Uniform };
/// Squared distance between cluster means, or the constant 1.
Matrix inter_cluster_cost(const std::vector<std::vector<double>>& means0,
                          const std::vector<std::vector<double>>& means1, ClusterCost kind);

/// Tuples (x0, x1, y0, y1). Before pairing the rows are independent draws.
struct LabeledBatch {
  Matrix x0, x1;
  std::vector<int> y0, y1;

  std::size_t size() const { return y0.size(); }
  SwitchSignal signal(std::size_t i) const { return {y0[i], y1[i]}; }
};

LabeledBatch make_batch(const LabeledPoints& source, const LabeledPoints& target);

struct BatchCouplingMatrix {
  Matrix pm;  // (m x m), entries sum to 1
  std::vector<int> y0, y1;
};

/// Pm(i,j) = P(y0_i, y1_j) / Count(y0_i, y1_j).
BatchCouplingMatrix build_batch_matrix(const CouplingMatrix& c, std::span<const int> y0, std::span<const int> y1);

/// n index pairs drawn i.i.d. (with replacement) from the flattened Pm.
LabeledBatch sample_switching_pairs(const BatchCouplingMatrix& pm, const LabeledBatch& batch, std::size_t n,
                                    Rng& rng);

/// Block-diagonal plan over batch rows: exact squared-Euclidean EMD inside each
/// switching group, group mass proportional to group size. Entry (i,j) couples
/// x0 of row i with x1 of row j.
Matrix masked_ot_plan(const LabeledBatch& batch);

/// Redraws as many pairs as the batch holds from masked_ot_plan().
LabeledBatch ot_resample_within_groups(const LabeledBatch& batch, Rng& rng);

/// Uniform random permutation of x1 against x0 inside each switching group.
LabeledBatch independent_pairs(const LabeledBatch& batch, Rng& rng);

}  // namespace sfm
