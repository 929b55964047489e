#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sfm/datasets.hpp"
#include "sfm/metrics.hpp"
#include "sfm/model.hpp"
#include "sfm/odeint.hpp"
#include "sfm/trainer.hpp"

namespace sfm {

struct DatasetSpec {
  std::string name;  // prop1 | prop2 | prop3 | 8gauss-checkerboard | gmm2
  std::optional<double> a, b, scale, mode_sigma;

  DatasetPair make() const;
};

struct ExperimentConfig {
  TrainConfig train;
  DatasetSpec dataset;
  SolverSpec solver;
  std::size_t eval_n = 2000;
  std::string out = "out";
};

/// Flat `key = value` lines; '#' starts a comment. family and dataset are
/// required, unknown or repeated keys are errors. Throws ConfigError naming the key.
ExperimentConfig parse_config(std::istream& is, const std::string& origin = "config");
ExperimentConfig load_config(const std::string& path);

/// Canonical text of everything that determines results (not the output
/// directory). Plain flows are written as the switched family they reduce to,
/// so K0 = K1 = 1 runs of either name share one digest.
std::string canonical_config(const ExperimentConfig& cfg);
std::string config_digest(const ExperimentConfig& cfg);

/// Checkpoint of a trained run. Meta holds the dataset and the switching
/// setup, so sampling needs nothing else.
Checkpoint make_checkpoint(const ExperimentConfig& cfg, const TrainResult& res);
DatasetSpec checkpoint_dataset(const Checkpoint& ck);
SwitchingSetup checkpoint_switching(const Checkpoint& ck);
TrainResult checkpoint_result(const Checkpoint& ck);

void write_checkpoint_file(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint_file(const std::string& path);

/// Proposition checks with pinned data, seeds and budgets.
const std::vector<std::string>& verify_ids();

struct VerifyOptions {
  std::uint64_t seed = 0;
  double budget = 1.0;  // multiplies every pinned iteration count
  std::function<void(const std::string&)> log;
};

/// Throws ConfigError for an unknown id.
Verdict run_verify(const std::string& id, const VerifyOptions& opt);

}  // namespace sfm
