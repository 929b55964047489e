#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sfm/coupling.hpp"
#include "sfm/datasets.hpp"
#include "sfm/error.hpp"
#include "sfm/matrix.hpp"
#include "sfm/model.hpp"
#include "sfm/rng.hpp"

namespace sfm {

enum class Method { Euler, RK4, Dopri5 };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct SolverSpec {
  Method method = Method::Dopri5;
  int steps = 100;  // fixed-step methods
  double rtol = 1e-5;
  double atol = 1e-5;
  double h0 = 0.0;  // 0: estimated from the initial slope
  int max_steps = 100000;
};

void validate(const SolverSpec& spec);

/// dx/dt = f(t, x), written into dx.
using Field = std::function<void(double t, std::span<const double> x, std::span<double> dx)>;

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  long nfe = 0;
  SwitchSignal s;

  const std::vector<double>& final_state() const { return states.back(); }
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, TrajectoryRecord partial)
      : Error(what), partial_(std::move(partial)) {}
  const TrajectoryRecord& partial() const { return partial_; }

 private:
  TrajectoryRecord partial_;
};

/// Integrates on [0, 1]. States are recorded at every accepted step; with
/// record_all = false only the endpoints are kept.
TrajectoryRecord integrate(const Field& f, std::span<const double> x0, const SolverSpec& spec, bool record_all = true);

/// Field of a trained model under a fixed switching signal.
Field model_field(const VectorFieldModel& model, SwitchSignal s);

/// The same signal-wise model field on n points stacked into one state vector;
/// all points share the solver's time grid.
Field stacked_model_field(const VectorFieldModel& model, std::span<const SwitchSignal> s);

struct Inference {
  LabeledPoints source;  // x0 with source labels
  Matrix x1;
  std::vector<SwitchSignal> s;
  std::vector<long> nfe;
  std::vector<TrajectoryRecord> trajectories;  // filled when requested

  double nfe_mean() const;
};

/// Source sample -> y0 from the labeler -> y1 ~ P(. | y0) -> solve the IVP.
/// source_labels maps the sampled source batch to y0.
Inference infer(const VectorFieldModel& model, const CouplingMatrix& p, const LabeledSampler& source,
                const std::function<std::vector<int>(const LabeledPoints&)>& source_labels, std::size_t n,
                const SolverSpec& spec, Rng& rng, bool keep_trajectories = false);

/// Draws y1 from the row-conditional of P for every y0.
std::vector<int> draw_target_labels(const CouplingMatrix& p, std::span<const int> y0, Rng& rng);

/// log p1(x1) by integrating the reverse flow (tau = 1 - t) with the Jacobian
/// trace from central differences of step 1e-5. d <= 3.
double log_density(const Field& f, std::size_t dim, const std::function<double(std::span<const double>)>& log_q0,
                   std::span<const double> x1, const SolverSpec& spec);

/// Minimum over recorded times of pairwise distances of trajectories started
/// at the rows of x0, all under signal s.
double noncross_check(const VectorFieldModel& model, SwitchSignal s, const Matrix& x0, const SolverSpec& spec);

/// Min over shared times of distances between trajectories of group a and group b.
double cross_group_gap(const VectorFieldModel& model, const Matrix& xa, SwitchSignal sa, const Matrix& xb,
                       SwitchSignal sb, const SolverSpec& spec);

/// Trajectory CSV: t, x_1..x_d, sample_id, y0, y1, nfe.
void write_trajectories_csv(std::ostream& os, const std::vector<TrajectoryRecord>& trajs);

}  // namespace sfm
