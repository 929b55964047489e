#include "sfm/trainer.hpp"

#include <cmath>

#include "sfm/error.hpp"
#include "sfm/odeint.hpp"

namespace sfm {

std::string to_string(Family f) {
  switch (f) {
    case Family::ICFM: return "I-CFM";
    case Family::OTCFM: return "OT-CFM";
    case Family::ISFM: return "I-SFM";
    case Family::OTSFM: return "OT-SFM";
    case Family::ICSFM: return "IC-SFM";
    case Family::OTCSFM: return "OTC-SFM";
  }
  return "I-SFM";
}

Family parse_family(const std::string& s) {
  for (auto f : {Family::ICFM, Family::OTCFM, Family::ISFM, Family::OTSFM, Family::ICSFM, Family::OTCSFM}) {
    if (to_string(f) == s) return f;
  }
  throw Error("unknown family '" + s + "'");
}

bool uses_ot(Family f) { return f == Family::OTCFM || f == Family::OTSFM; }
bool is_cfm(Family f) { return f == Family::ICFM || f == Family::OTCFM; }
bool is_joint(Family f) { return f == Family::ICSFM || f == Family::OTCSFM; }

std::vector<int> Labeler::apply(const LabeledPoints& pts) const {
  switch (kind) {
    case Kind::Constant: return std::vector<int>(pts.labels.size(), 0);
    case Kind::Analytic: return pts.labels;
    case Kind::Clusters: return clusters.assign(pts.points);
  }
  return {};
}

std::vector<int> Labeler::apply(const Matrix& points) const {
  switch (kind) {
    case Kind::Constant: return std::vector<int>(points.rows(), 0);
    case Kind::Analytic: throw Error("analytic labels need the generating mode of each point");
    case Kind::Clusters: return clusters.assign(points);
  }
  return {};
}

namespace {

struct SideFit {
  Labeler labeler;
  std::vector<double> masses;
  std::vector<std::vector<double>> means;
};

SideFit fit_side(const LabeledSampler& sampler, int k, LabelMode mode, std::size_t fit_samples, Rng& rng) {
  SideFit out;
  out.labeler.k = k;
  if (k < 1) throw Error("cluster count must be >= 1");
  if (k == 1 && mode != LabelMode::KMeans) {
    out.labeler.kind = Labeler::Kind::Constant;
    out.masses = {1.0};
    std::vector<double> mean(sampler.dim(), 0.0);
    for (const auto& m : sampler.modes()) {
      auto mm = m.mean();
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += m.weight * mm[j];
    }
    out.means = {mean};
    return out;
  }
  const bool analytic = mode == LabelMode::Analytic || (mode == LabelMode::Auto && k == sampler.mode_count());
  if (analytic) {
    if (k != sampler.mode_count()) {
      throw Error("analytic labels need K = " + std::to_string(sampler.mode_count()) + " for " + sampler.name() +
                  ", got " + std::to_string(k));
    }
    out.labeler.kind = Labeler::Kind::Analytic;
    out.masses = sampler.weights();
    for (const auto& m : sampler.modes()) out.means.push_back(m.mean());
    return out;
  }
  out.labeler.kind = Labeler::Kind::Clusters;
  auto pts = sampler.sample(fit_samples, rng);
  auto km = kmeans(pts.points, k, rng);
  out.labeler.clusters = km.model;
  out.masses.assign(static_cast<std::size_t>(k), 0.0);
  for (int l : km.labels) out.masses[static_cast<std::size_t>(l)] += 1.0;
  for (double& v : out.masses) v /= static_cast<double>(fit_samples);
  for (std::size_t c = 0; c < km.model.centers.rows(); ++c) {
    out.means.emplace_back(km.model.centers.row(c).begin(), km.model.centers.row(c).end());
  }
  return out;
}

}  // namespace

SwitchingSetup make_switching(const CouplingSpec& spec, const DatasetPair& data, std::size_t fit_samples, Rng& rng) {
  auto src = fit_side(data.source, spec.k0, spec.labels, fit_samples, rng);
  auto tgt = fit_side(data.target, spec.k1, spec.labels, fit_samples, rng);
  SwitchingSetup out{src.labeler, tgt.labeler, {}};
  if (spec.kind == CouplingKind::Custom) {
    if (!spec.custom) throw Error("custom coupling needs an explicit P");
    if (spec.custom->rows() != static_cast<std::size_t>(spec.k0) ||
        spec.custom->cols() != static_cast<std::size_t>(spec.k1)) {
      throw Error("custom P has shape " + spec.custom->shape_string() + ", expected (" + std::to_string(spec.k0) +
                  "x" + std::to_string(spec.k1) + ")");
    }
    // P carries its own marginals; only generating-mode labels have exact masses to check against
    std::vector<double> r0(spec.custom->rows(), 0.0), r1(spec.custom->cols(), 0.0);
    for (std::size_t i = 0; i < r0.size(); ++i) {
      for (std::size_t j = 0; j < r1.size(); ++j) {
        r0[i] += (*spec.custom)(i, j);
        r1[j] += (*spec.custom)(i, j);
      }
    }
    const bool exact0 = src.labeler.kind != Labeler::Kind::Clusters;
    const bool exact1 = tgt.labeler.kind != Labeler::Kind::Clusters;
    out.coupling = make_custom_coupling(*spec.custom, exact0 ? src.masses : r0, exact1 ? tgt.masses : r1);
  } else {
    const Matrix cost = inter_cluster_cost(src.means, tgt.means, spec.cost);
    out.coupling = make_coupling_matrix(spec.kind, src.masses, tgt.masses, &cost);
  }
  return out;
}

TrainingPair make_training_pair(std::span<const double> x0, std::span<const double> x1, SwitchSignal s, double t,
                                double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw Error("sigma must be >= 0");
  if (!(t >= 0.0 && t <= 1.0)) throw Error("t must lie in [0, 1]");
  if (x0.size() != x1.size()) throw Error("x0 and x1 differ in dimension");
  TrainingPair p;
  p.t = t;
  p.s = s;
  p.xt.resize(x0.size());
  p.u.resize(x0.size());
  for (std::size_t k = 0; k < x0.size(); ++k) {
    p.xt[k] = (1.0 - t) * x0[k] + t * x1[k];
    if (sigma > 0.0) p.xt[k] += sigma * rng.normal();
    p.u[k] = x1[k] - x0[k];
  }
  return p;
}

TrainingBatch make_training_batch(const LabeledBatch& pairs, std::span<const double> t, double sigma, Rng& rng) {
  const std::size_t n = pairs.size(), d = pairs.x0.cols();
  if (t.size() != n) throw Error("need one time per pair");
  TrainingBatch b{Matrix(n, d), {t.begin(), t.end()}, Matrix(n, d), {}};
  for (std::size_t i = 0; i < n; ++i) {
    auto p = make_training_pair(pairs.x0.row(i), pairs.x1.row(i), pairs.signal(i), t[i], sigma, rng);
    std::copy(p.xt.begin(), p.xt.end(), b.xt.row(i).begin());
    std::copy(p.u.begin(), p.u.end(), b.u.row(i).begin());
    b.s.push_back(p.s);
  }
  return b;
}

ad::Value scfm_loss(const VectorFieldModel& model, ad::Tape& tape, std::span<const ad::Value> params,
                    const TrainingBatch& batch) {
  if (batch.size() == 0) throw Error("loss needs a nonempty batch");
  auto v = model.forward(tape, params, model.build_input(batch.xt, batch.t, batch.s));
  return ad::squared_error_mean(v, tape.constant(batch.u));
}

double scfm_loss_value(const VectorFieldModel& model, const TrainingBatch& batch) {
  if (batch.size() == 0) throw Error("loss needs a nonempty batch");
  const Matrix v = model.eval(batch.xt, batch.t, batch.s);
  double s = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double e = v.values()[k] - batch.u.values()[k];
    s += e * e;
  }
  return s / static_cast<double>(v.size());
}

PairSampler::PairSampler(const TrainConfig& cfg, const DatasetPair& data, SwitchingSetup setup)
    : cfg_(cfg), data_(&data), setup_(std::move(setup)) {}

PairSampler::PairSampler(const TrainConfig& cfg, LabeledBatch pool, SwitchingSetup setup)
    : cfg_(cfg), pool_(std::move(pool)), setup_(std::move(setup)) {}

LabeledBatch PairSampler::next(Rng& rng) const {
  const std::size_t m = cfg_.batch;
  if (pool_) {
    // ODE pairs are kept as they are; no batch-level re-coupling
    std::vector<std::size_t> idx(m);
    for (auto& i : idx) i = rng.below(pool_->size());
    LabeledBatch b{pool_->x0.gather_rows(idx), pool_->x1.gather_rows(idx), {}, {}};
    for (auto i : idx) {
      b.y0.push_back(pool_->y0[i]);
      b.y1.push_back(pool_->y1[i]);
    }
    return b;
  }
  auto src = data_->source.sample(m, rng);
  auto tgt = data_->target.sample(m, rng);
  src.labels = setup_.source.apply(src);
  tgt.labels = setup_.target.apply(tgt);
  auto batch = make_batch(src, tgt);
  auto pm = build_batch_matrix(setup_.coupling, batch.y0, batch.y1);
  auto pairs = sample_switching_pairs(pm, batch, m, rng);
  if (uses_ot(cfg_.family)) pairs = ot_resample_within_groups(pairs, rng);
  return pairs;
}

namespace {

ModelSpec model_spec(const TrainConfig& cfg, std::size_t dim, int k0, int k1) {
  ModelSpec s;
  s.dim = static_cast<int>(dim);
  s.hidden = cfg.hidden;
  s.depth = cfg.depth;
  s.switching = {k0, k1};
  return s;
}

void check_config(const TrainConfig& cfg, const DatasetPair& data) {
  if (data.source.dim() != data.target.dim()) throw Error("source and target dimensions differ");
  if (cfg.batch < 1 || cfg.iters < 0 || !(cfg.lr > 0.0) || !(cfg.sigma >= 0.0)) {
    throw Error("training needs batch >= 1, iters >= 0, lr > 0, sigma >= 0");
  }
  if (is_cfm(cfg.family) && (cfg.coupling.k0 != 1 || cfg.coupling.k1 != 1)) {
    throw Error(to_string(cfg.family) + " requires K0 = K1 = 1");
  }
}

TrainResult fit(const TrainConfig& cfg, VectorFieldModel model, const PairSampler& sampler, Rng& rng,
                const StepCallback& on_step) {
  AdamState adam = make_adam(model, cfg.lr);
  const auto names = model.parameter_names();
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(cfg.iters));
  std::vector<double> t(cfg.batch);
  for (int it = 0; it < cfg.iters; ++it) {
    auto pairs = sampler.next(rng);
    for (double& v : t) v = rng.uniform();
    auto batch = make_training_batch(pairs, t, cfg.sigma, rng);
    ad::Tape tape;
    auto params = model.bind(tape);
    auto loss = scfm_loss(model, tape, params, batch);
    auto grads = ad::backward(tape, loss);
    std::vector<Matrix> g;
    for (const auto& p : params) g.push_back(grads.at(p));
    auto ps = model.parameters();
    adam_step(adam, ps, g, names);
    trace.push_back(loss.scalar());
    if (on_step) on_step(it, trace.back());
  }
  return {std::move(model), std::move(adam), sampler.setup(), std::move(trace)};
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const DatasetPair& data, const StepCallback& on_step) {
  check_config(cfg, data);
  Rng rng(cfg.seed);
  if (!is_joint(cfg.family)) {
    VectorFieldModel model(model_spec(cfg, data.source.dim(), cfg.coupling.k0, cfg.coupling.k1), rng);
    auto setup = make_switching(cfg.coupling, data, cfg.fit_samples, rng);
    PairSampler sampler(cfg, data, std::move(setup));
    return fit(cfg, std::move(model), sampler, rng, on_step);
  }

  // Baseline flow, then joint clusters of its (x0, x1) pairs.
  TrainConfig base = cfg;
  base.family = cfg.family == Family::ICSFM ? Family::ICFM : Family::OTCFM;
  base.coupling = CouplingSpec{};
  base.iters = cfg.baseline_iters;
  base.seed = rng.split().engine()();
  auto baseline = train(base, data, {});

  auto src = data.source.sample(cfg.fit_samples, rng);
  SolverSpec solver;
  solver.method = Method::RK4;
  solver.steps = 50;
  Matrix x1(src.points.rows(), src.points.cols());
  for (std::size_t i = 0; i < src.points.rows(); ++i) {
    auto rec = integrate(model_field(baseline.model, {0, 0}), src.points.row(i), solver, false);
    std::copy(rec.final_state().begin(), rec.final_state().end(), x1.row(i).begin());
  }
  auto jc = joint_cluster(src.points, x1, cfg.joint_k, rng);
  const std::size_t d = src.points.cols();
  SwitchingSetup setup;
  setup.source = {Labeler::Kind::Clusters, cfg.joint_k, jc.model.project(0, d)};
  setup.target = {Labeler::Kind::Clusters, cfg.joint_k, jc.model.project(d, d)};
  setup.coupling = jc.coupling;
  LabeledBatch pool{src.points, x1, jc.labels, jc.labels};

  VectorFieldModel model(model_spec(cfg, d, cfg.joint_k, cfg.joint_k), rng);
  PairSampler sampler(cfg, std::move(pool), std::move(setup));
  return fit(cfg, std::move(model), sampler, rng, on_step);
}

}  // namespace sfm
