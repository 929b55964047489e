#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sfm/coupling.hpp"
#include "sfm/datasets.hpp"
#include "sfm/model.hpp"
#include "sfm/odeint.hpp"
#include "sfm/rng.hpp"
#include "sfm/trainer.hpp"

namespace sfm {

struct EvalSpec {
  std::size_t subsample = 512;
  int repeats = 5;
  double support_tol = 0.05;  // slack around analytic supports
};

struct EvalReport {
  double w2sq = 0.0;
  double action = 0.0;
  double straightness = 0.0;
  double lipschitz_est = 0.0;  // NaN unless a model was supplied
  std::vector<double> mode_masses;
  double gap_mass = 0.0;
  double nfe_mean = 0.0;
};

/// Median over repeats of W2^2 between equal-size random subsamples.
double w2sq_subsampled(const Matrix& x, const Matrix& y, const EvalSpec& spec, Rng& rng);

/// Mean over trajectories of sum |dx|^2 / dt.
double riemann_action(const std::vector<TrajectoryRecord>& trajs);
/// Mean over trajectories of path length / chord length; stationary paths count as 1.
double mean_straightness(const std::vector<TrajectoryRecord>& trajs);

/// Fractions of points in each target mode's support (first match wins) and outside all of them.
void support_masses(const Matrix& x, const LabeledSampler& target, double tol, std::vector<double>& mode_masses,
                    double& gap_mass);

/// Needs at least 256 generated and 256 target points.
EvalReport evaluate(const Matrix& generated, const Matrix& target_points, const LabeledSampler& target,
                    const std::vector<TrajectoryRecord>& trajs, double nfe_mean, const EvalSpec& spec, Rng& rng);

void write_eval_header(std::ostream& os, std::size_t modes);
void write_eval_row(std::ostream& os, const std::string& label, const EvalReport& r);

/// Max over n_pairs point pairs drawn uniformly from the ball of
/// |phi1(x) - phi1(x')| / |x - x'|.
double lipschitz_estimate(const Field& f, std::span<const double> center, double radius, std::size_t n_pairs,
                          const SolverSpec& spec, Rng& rng);
double lipschitz_estimate(const VectorFieldModel& model, SwitchSignal s, std::span<const double> center, double radius,
                          std::size_t n_pairs, const SolverSpec& spec, Rng& rng);

struct Assertion {
  std::string name;
  bool passed = false;
  double value = 0.0;
  std::string bound;
};

struct Verdict {
  std::string id;
  std::vector<Assertion> checks;
  double seconds = 0.0;

  void add(std::string name, bool passed, double value, std::string bound);
  bool passed() const;
  std::vector<std::string> failures() const;
};

void write_verdict_csv(std::ostream& os, const Verdict& v);

/// Samples of a trained model under its switching setup.
Inference generate(const TrainResult& trained, const LabeledSampler& source, std::size_t n, const SolverSpec& spec,
                   Rng& rng, bool keep_trajectories = false);

/// delta0 -> 1/2 delta(-a) + 1/2 delta(a): the plain flow lands on one interior point,
/// the one-to-two switched flow lands on both targets.
Verdict verify_corollary1(double a, const TrainResult& cfm, const TrainResult& sfm, const DatasetPair& data,
                          std::size_t n, const SolverSpec& spec, Rng& rng);

/// Vertical segment -> two vertical lines.
Verdict verify_prop3(const TrainResult& cfm, const TrainResult& sfm, const DatasetPair& data, std::size_t n,
                     const SolverSpec& spec, const EvalSpec& eval, Rng& rng);

/// Two-to-two crossing coupling against a minibatch-OT plain flow.
Verdict verify_prop2_crossing(double a, const TrainResult& otcfm, const TrainResult& sfm, const DatasetPair& data,
                              std::size_t n, const SolverSpec& spec, const EvalSpec& eval, Rng& rng);

/// cfm[i], sfm[i] are estimates at a[i] (a increasing).
Verdict verify_lipschitz_trend(std::span<const double> a, std::span<const double> cfm, std::span<const double> sfm);

/// Empirical (y0, y1) frequencies of the batch pipeline against P for the
/// two2one, one2ten, two2ten mixed and two2ten extremal matrices.
Verdict verify_switching_sampling(std::size_t draws, Rng& rng);

/// Extremal P for random marginals and costs has at most K0 + K1 - 1 nonzeros.
Verdict verify_extremal_p(int trials, Rng& rng);

/// OT-SFM straighter than I-SFM; OT-SFM with 5 Euler steps within 2x of its adaptive W2^2.
Verdict verify_straightness(const TrainResult& otsfm, const TrainResult& isfm, const DatasetPair& data,
                            std::size_t n, const SolverSpec& adaptive, const EvalSpec& eval, Rng& rng);

}  // namespace sfm
