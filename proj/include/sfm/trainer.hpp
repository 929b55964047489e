#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfm/autodiff.hpp"
#include "sfm/clustering.hpp"
#include "sfm/coupling.hpp"
#include "sfm/datasets.hpp"
#include "sfm/model.hpp"

namespace sfm {

enum class Family { ICFM, OTCFM, ISFM, OTSFM, ICSFM, OTCSFM };

std::string to_string(Family f);
Family parse_family(const std::string& s);
bool uses_ot(Family f);
bool is_cfm(Family f);
/// IC-SFM / OTC-SFM: switching from joint clusters of a baseline flow.
bool is_joint(Family f);

/// Maps points of one side to cluster labels.
struct Labeler {
  enum class Kind { Constant, Analytic, Clusters };
  Kind kind = Kind::Constant;
  int k = 1;
  ClusterModel clusters;  // Kind::Clusters only

  std::vector<int> apply(const LabeledPoints& pts) const;
  /// Constant and Clusters only; analytic labels need the generating mode.
  std::vector<int> apply(const Matrix& points) const;
};

enum class LabelMode { Auto, Analytic, KMeans };

struct CouplingSpec {
  int k0 = 1;
  int k1 = 1;
  CouplingKind kind = CouplingKind::One2One;
  ClusterCost cost = ClusterCost::MeanDistance;
  std::optional<Matrix> custom;
  LabelMode labels = LabelMode::Auto;
};

struct TrainConfig {
  Family family = Family::ISFM;
  CouplingSpec coupling;
  std::size_t batch = 256;
  int iters = 10000;
  double lr = 1e-3;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  int hidden = 64;
  int depth = 2;
  std::size_t fit_samples = 4096;  // label fitting and joint-clustering pool
  int joint_k = 3;
  int baseline_iters = 10000;
};

/// Labelers for both sides plus the coupling matrix P they induce.
struct SwitchingSetup {
  Labeler source;
  Labeler target;
  CouplingMatrix coupling;
};

/// K = 1: constant; K = mode count (auto/analytic): generating mode;
/// otherwise k-means on fit_samples draws.
SwitchingSetup make_switching(const CouplingSpec& spec, const DatasetPair& data, std::size_t fit_samples, Rng& rng);

struct TrainingPair {
  std::vector<double> xt;
  double t = 0.0;
  std::vector<double> u;
  SwitchSignal s;
};

/// x_t = (1-t) x0 + t x1 + sigma * xi, u = x1 - x0.
TrainingPair make_training_pair(std::span<const double> x0, std::span<const double> x1, SwitchSignal s, double t,
                                double sigma, Rng& rng);

struct TrainingBatch {
  Matrix xt;
  std::vector<double> t;
  Matrix u;
  std::vector<SwitchSignal> s;

  std::size_t size() const { return t.size(); }
};

TrainingBatch make_training_batch(const LabeledBatch& pairs, std::span<const double> t, double sigma, Rng& rng);

/// mean over batch and coordinates of (v_t(x_t | s) - u)^2.
ad::Value scfm_loss(const VectorFieldModel& model, ad::Tape& tape, std::span<const ad::Value> params,
                    const TrainingBatch& batch);
double scfm_loss_value(const VectorFieldModel& model, const TrainingBatch& batch);

/// Runs the full pipeline up to (and excluding) the loss: batch draw, switching
/// coupling, optional masked OT.
class PairSampler {
 public:
  PairSampler(const TrainConfig& cfg, const DatasetPair& data, SwitchingSetup setup);
  /// Joint families draw from a fixed pool of (x0, x1, label) triples instead.
  PairSampler(const TrainConfig& cfg, LabeledBatch pool, SwitchingSetup setup);

  LabeledBatch next(Rng& rng) const;
  const SwitchingSetup& setup() const { return setup_; }

 private:
  TrainConfig cfg_;
  const DatasetPair* data_ = nullptr;
  std::optional<LabeledBatch> pool_;
  SwitchingSetup setup_;
};

struct TrainResult {
  VectorFieldModel model;
  AdamState adam;
  SwitchingSetup setup;
  std::vector<double> loss;
};

using StepCallback = std::function<void(int iter, double loss)>;

TrainResult train(const TrainConfig& cfg, const DatasetPair& data, const StepCallback& on_step = {});

}  // namespace sfm
