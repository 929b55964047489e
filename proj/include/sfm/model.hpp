#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sfm/autodiff.hpp"
#include "sfm/matrix.hpp"
#include "sfm/rng.hpp"
#include "sfm/text.hpp"

namespace sfm {

/// Switching signal s = (y0, y1): source and target cluster labels.
struct SwitchSignal {
  int y0 = 0;
  int y1 = 0;
  auto operator<=>(const SwitchSignal&) const = default;
};

struct SwitchSpec {
  int k0 = 1;
  int k1 = 1;
  int states() const { return k0 * k1; }
};

/// One-hot(y0, K0) followed by one-hot(y1, K1).
std::vector<double> encode_switch(SwitchSignal s, const SwitchSpec& spec);

struct ModelSpec {
  int dim = 1;
  int hidden = 64;
  int depth = 2;
  SwitchSpec switching;

  // A single switching state carries no information, so it is not fed to the
  // network. This keeps K0 = K1 = 1 identical to a plain CFM field.
  bool conditioned() const { return switching.states() > 1; }
  int input_width() const { return dim + 1 + (conditioned() ? switching.k0 + switching.k1 : 0); }
  bool operator==(const ModelSpec& o) const {
    return dim == o.dim && hidden == o.hidden && depth == o.depth &&
           switching.k0 == o.switching.k0 && switching.k1 == o.switching.k1;
  }
};

struct Layer {
  Matrix weight;  // (in x out)
  Matrix bias;    // (1 x out)
};

/// MLP v_t(x; theta | s): [x, t, enc(s)] -> hidden -> SELU -> ... -> linear(dim).
class VectorFieldModel {
 public:
  /// Fan-in uniform init for hidden layers; the output layer starts at zero so
  /// the initial flow is the identity map.
  VectorFieldModel(const ModelSpec& spec, Rng& rng);
  VectorFieldModel(const ModelSpec& spec, std::vector<Layer> layers);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Matrix build_input(const Matrix& x, std::span<const double> t,
                     std::span<const SwitchSignal> s) const;

  /// Velocities (batch x dim).
  Matrix eval(const Matrix& x, std::span<const double> t, std::span<const SwitchSignal> s) const;
  void eval_point(std::span<const double> x, double t, SwitchSignal s, std::span<double> out) const;

  /// Registers every parameter as a leaf, in parameter order.
  std::vector<ad::Value> bind(ad::Tape& tape) const;
  ad::Value forward(ad::Tape& tape, std::span<const ad::Value> params, const Matrix& input) const;

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;

 private:
  void check_switch(SwitchSignal s) const;

  ModelSpec spec_;
  std::vector<Layer> layers_;
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

AdamState make_adam(const VectorFieldModel& model, double lr);

/// One bias-corrected Adam update of params in place.
void adam_step(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix> grads,
               std::span<const std::string> names);

/// Versioned text checkpoint. Reals are written in shortest round-trip form,
/// so parameters survive a write/read cycle bit for bit.
struct Checkpoint {
  ModelSpec spec;
  std::vector<Layer> layers;
  AdamState adam;
  std::uint64_t seed = 0;
  std::int64_t iteration = 0;
  std::vector<std::pair<std::string, std::string>> meta;

  const std::string* find_meta(const std::string& key) const;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& is);

}  // namespace sfm
