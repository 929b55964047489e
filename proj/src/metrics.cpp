#include "sfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "sfm/discrete_ot.hpp"
#include "sfm/error.hpp"
#include "sfm/text.hpp"

namespace sfm {

namespace {

std::vector<std::size_t> choose(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  return idx;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) { return format_real(v); }

}  // namespace

double w2sq_subsampled(const Matrix& x, const Matrix& y, const EvalSpec& spec, Rng& rng) {
  if (x.cols() != y.cols()) throw Error("W2 needs point sets of equal dimension");
  if (spec.repeats < 1 || spec.subsample < 1) throw Error("W2 needs repeats >= 1 and subsample >= 1");
  const std::size_t k = std::min({spec.subsample, x.rows(), y.rows()});
  if (k == 0) throw Error("W2 needs nonempty point sets");
  std::vector<double> vals;
  for (int r = 0; r < spec.repeats; ++r) {
    const auto ix = choose(x.rows(), k, rng);
    const auto iy = choose(y.rows(), k, rng);
    vals.push_back(w2_squared(x.gather_rows(ix), y.gather_rows(iy)));
  }
  return median(std::move(vals));
}

double riemann_action(const std::vector<TrajectoryRecord>& trajs) {
  if (trajs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& tr : trajs) {
    for (std::size_t k = 1; k < tr.times.size(); ++k) {
      const double dt = tr.times[k] - tr.times[k - 1];
      if (dt > 0.0) total += squared_distance(tr.states[k], tr.states[k - 1]) / dt;
    }
  }
  return total / static_cast<double>(trajs.size());
}

double mean_straightness(const std::vector<TrajectoryRecord>& trajs) {
  if (trajs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& tr : trajs) {
    double path = 0.0;
    for (std::size_t k = 1; k < tr.states.size(); ++k) path += std::sqrt(squared_distance(tr.states[k], tr.states[k - 1]));
    const double chord = std::sqrt(squared_distance(tr.states.back(), tr.states.front()));
    total += chord > 0.0 ? std::max(1.0, path / chord) : 1.0;
  }
  return total / static_cast<double>(trajs.size());
}

void support_masses(const Matrix& x, const LabeledSampler& target, double tol, std::vector<double>& mode_masses,
                    double& gap_mass) {
  mode_masses.assign(static_cast<std::size_t>(target.mode_count()), 0.0);
  gap_mass = 0.0;
  if (x.rows() == 0) return;
  std::size_t gap = 0;
  std::vector<std::size_t> counts(mode_masses.size(), 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const int l = target.support_label(x.row(i), tol);
    if (l < 0) {
      ++gap;
    } else {
      ++counts[static_cast<std::size_t>(l)];
    }
  }
  const double n = static_cast<double>(x.rows());
  for (std::size_t k = 0; k < counts.size(); ++k) mode_masses[k] = static_cast<double>(counts[k]) / n;
  gap_mass = static_cast<double>(gap) / n;
}

EvalReport evaluate(const Matrix& generated, const Matrix& target_points, const LabeledSampler& target,
                    const std::vector<TrajectoryRecord>& trajs, double nfe_mean, const EvalSpec& spec, Rng& rng) {
  if (generated.rows() < 256 || target_points.rows() < 256) {
    throw Error("evaluation needs at least 256 generated and 256 target points, got " +
                std::to_string(generated.rows()) + " and " + std::to_string(target_points.rows()));
  }
  EvalReport r;
  r.w2sq = w2sq_subsampled(generated, target_points, spec, rng);
  r.action = riemann_action(trajs);
  r.straightness = mean_straightness(trajs);
  r.lipschitz_est = std::numeric_limits<double>::quiet_NaN();
  support_masses(generated, target, spec.support_tol, r.mode_masses, r.gap_mass);
  r.nfe_mean = nfe_mean;
  return r;
}

void write_eval_header(std::ostream& os, std::size_t modes) {
  os << "label,w2sq,action,straightness,lipschitz_est,nfe_mean,gap_mass";
  for (std::size_t k = 0; k < modes; ++k) os << ",mode_" << k;
  os << '\n';
}

void write_eval_row(std::ostream& os, const std::string& label, const EvalReport& r) {
  os << label << ',' << fmt(r.w2sq) << ',' << fmt(r.action) << ',' << fmt(r.straightness) << ','
     << fmt(r.lipschitz_est) << ',' << fmt(r.nfe_mean) << ',' << fmt(r.gap_mass);
  for (double m : r.mode_masses) os << ',' << fmt(m);
  os << '\n';
}

namespace {

std::vector<double> ball_point(std::span<const double> center, double radius, Rng& rng) {
  const std::size_t d = center.size();
  std::vector<double> dir(d);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (double& v : dir) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
  }
  const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
  std::vector<double> x(d);
  for (std::size_t k = 0; k < d; ++k) x[k] = center[k] + r * dir[k] / norm;
  return x;
}

}  // namespace

namespace {

// All points share one step sequence, so the numerical flow map is a single
// smooth function and close pairs do not pick up independent solver error.
double stacked_lipschitz(const Field& stacked, std::span<const double> center, double radius, std::size_t n_pairs,
                         const SolverSpec& spec, Rng& rng) {
  if (!(radius > 0.0)) throw Error("Lipschitz estimate needs radius > 0");
  if (n_pairs < 1) throw Error("Lipschitz estimate needs at least one pair");
  const std::size_t d = center.size();
  std::vector<double> x0;
  for (std::size_t p = 0; p < 2 * n_pairs; ++p) {
    const auto x = ball_point(center, radius, rng);
    x0.insert(x0.end(), x.begin(), x.end());
  }
  const auto x1 = integrate(stacked, x0, spec, false).final_state();
  double best = 0.0;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const std::size_t i = 2 * p * d, j = (2 * p + 1) * d;
    const double d0 = std::sqrt(squared_distance({x0.data() + i, d}, {x0.data() + j, d}));
    if (d0 == 0.0) continue;
    best = std::max(best, std::sqrt(squared_distance({x1.data() + i, d}, {x1.data() + j, d})) / d0);
  }
  return best;
}

}  // namespace

double lipschitz_estimate(const Field& f, std::span<const double> center, double radius, std::size_t n_pairs,
                          const SolverSpec& spec, Rng& rng) {
  const std::size_t d = center.size();
  Field stacked = [&f, d](double t, std::span<const double> x, std::span<double> dx) {
    for (std::size_t k = 0; k < x.size(); k += d) f(t, x.subspan(k, d), dx.subspan(k, d));
  };
  return stacked_lipschitz(stacked, center, radius, n_pairs, spec, rng);
}

double lipschitz_estimate(const VectorFieldModel& model, SwitchSignal s, std::span<const double> center, double radius,
                          std::size_t n_pairs, const SolverSpec& spec, Rng& rng) {
  if (center.size() != static_cast<std::size_t>(model.spec().dim)) throw Error("center dimension does not match model");
  const std::vector<SwitchSignal> sig(2 * n_pairs, s);
  return stacked_lipschitz(stacked_model_field(model, sig), center, radius, n_pairs, spec, rng);
}

void Verdict::add(std::string name, bool ok, double value, std::string bound) {
  checks.push_back({std::move(name), ok, value, std::move(bound)});
}

bool Verdict::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Assertion& a) { return a.passed; });
}

std::vector<std::string> Verdict::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (!c.passed) out.push_back(c.name + " = " + fmt(c.value) + " (want " + c.bound + ")");
  }
  return out;
}

void write_verdict_csv(std::ostream& os, const Verdict& v) {
  os << "id,check,passed,value,bound\n";
  for (const auto& c : v.checks) {
    os << v.id << ',' << c.name << ',' << (c.passed ? "pass" : "fail") << ',' << fmt(c.value) << ",\"" << c.bound
       << "\"\n";
  }
}

Inference generate(const TrainResult& trained, const LabeledSampler& source, std::size_t n, const SolverSpec& spec,
                   Rng& rng, bool keep_trajectories) {
  const Labeler& labeler = trained.setup.source;
  return infer(trained.model, trained.setup.coupling, source,
               [&labeler](const LabeledPoints& pts) { return labeler.apply(pts); }, n, spec, rng, keep_trajectories);
}

namespace {

double fraction(const Matrix& x, const std::function<bool(std::span<const double>)>& pred) {
  if (x.rows() == 0) return 0.0;
  std::size_t c = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) c += pred(x.row(i)) ? 1 : 0;
  return static_cast<double>(c) / static_cast<double>(x.rows());
}

/// Up to `cap` source points of the given signal.
Matrix group_starts(const Inference& inf, SwitchSignal s, std::size_t cap) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < inf.s.size() && idx.size() < cap; ++i) {
    if (inf.s[i] == s) idx.push_back(i);
  }
  return inf.source.points.gather_rows(idx);
}

}  // namespace

Verdict verify_corollary1(double a, const TrainResult& cfm, const TrainResult& sfm, const DatasetPair& data,
                          std::size_t n, const SolverSpec& spec, Rng& rng) {
  Verdict v{"corollary1", {}, 0.0};
  const auto plain = generate(cfm, data.source, n, spec, rng);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lo = std::min(lo, plain.x1(i, 0));
    hi = std::max(hi, plain.x1(i, 0));
    mean += plain.x1(i, 0) / static_cast<double>(n);
  }
  v.add("cfm_endpoint_spread", hi - lo < 1e-3, hi - lo, "< 1e-3");
  v.add("cfm_abs_endpoint", std::abs(mean) <= 0.9 * a, std::abs(mean), "<= " + fmt(0.9 * a));

  const auto sw = generate(sfm, data.source, n, spec, rng);
  double worst_neg = 0.0, worst_pos = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = sw.x1(i, 0);
    // target label 0 is the mode at -a
    if (sw.s[i].y1 == 0) {
      worst_neg = std::max(worst_neg, std::abs(x + a));
    } else {
      worst_pos = std::max(worst_pos, std::abs(x - a));
    }
    pos += x > 0.0 ? 1 : 0;
  }
  v.add("sfm_branch_minus_a_error", worst_neg < 0.05 * a, worst_neg, "< " + fmt(0.05 * a));
  v.add("sfm_branch_plus_a_error", worst_pos < 0.05 * a, worst_pos, "< " + fmt(0.05 * a));
  const double mass = static_cast<double>(pos) / static_cast<double>(n);
  v.add("sfm_positive_branch_mass", std::abs(mass - 0.5) <= 0.05, mass, "0.5 +- 0.05");
  return v;
}

Verdict verify_prop3(const TrainResult& cfm, const TrainResult& sfm, const DatasetPair& data, std::size_t n,
                     const SolverSpec& spec, const EvalSpec& eval, Rng& rng) {
  Verdict v{"prop3-infinite", {}, 0.0};
  const auto target = data.target.sample(n, rng).points;
  auto in_gap = [](std::span<const double> x) { return std::abs(x[0]) < 0.5; };

  const auto plain = generate(cfm, data.source, n, spec, rng);
  const double cfm_gap = fraction(plain.x1, in_gap);
  v.add("cfm_mass_between_lines", cfm_gap > 0.9, cfm_gap, "> 0.9");
  double drift = 0.0;
  for (std::size_t i = 0; i < n; ++i) drift += std::abs(plain.x1(i, 1) - plain.source.points(i, 1));
  drift /= static_cast<double>(n);
  v.add("cfm_mean_vertical_drift", drift < 0.1, drift, "< 0.1");
  const Rng shared = rng.split();
  Rng r_cfm = shared, r_sfm = shared;
  const double w2_cfm = w2sq_subsampled(plain.x1, target, eval, r_cfm);

  const auto sw = generate(sfm, data.source, n, spec, rng);
  const double sfm_gap = fraction(sw.x1, in_gap);
  v.add("sfm_mass_between_lines", sfm_gap < 0.1, sfm_gap, "< 0.1");
  const double left = fraction(sw.x1, [](std::span<const double> x) { return x[0] < 0.0; });
  v.add("sfm_left_line_mass", std::abs(left - 0.5) <= 0.05, left, "0.5 +- 0.05");
  double line_dist = 0.0;
  for (std::size_t i = 0; i < n; ++i) line_dist += std::abs(sw.x1(i, 0));
  line_dist = line_dist / static_cast<double>(n) - 1.0;
  v.add("sfm_mean_abs_x_minus_1", std::abs(line_dist) <= 0.05, line_dist, "|.| <= 0.05");
  std::size_t right_labels = 0;
  for (const auto& s : sw.s) right_labels += s.y1 == 1 ? 1 : 0;
  const double split = static_cast<double>(right_labels) / static_cast<double>(n);
  const double sd = std::sqrt(0.25 / static_cast<double>(n));
  v.add("sfm_label_split", std::abs(split - 0.5) <= 3.0 * sd, split, "0.5 +- " + fmt(3.0 * sd));
  const double w2_sfm = w2sq_subsampled(sw.x1, target, eval, r_sfm);
  v.add("w2sq_cfm_over_sfm", w2_cfm >= 5.0 * w2_sfm, w2_sfm > 0.0 ? w2_cfm / w2_sfm : INFINITY, ">= 5");
  return v;
}

Verdict verify_prop2_crossing(double a, const TrainResult& otcfm, const TrainResult& sfm, const DatasetPair& data,
                              std::size_t n, const SolverSpec& spec, const EvalSpec& eval, Rng& rng) {
  Verdict v{"prop2-crossing", {}, 0.0};
  const auto target = data.target.sample(n, rng).points;
  const auto plain = generate(otcfm, data.source, n, spec, rng);
  const auto sw = generate(sfm, data.source, n, spec, rng);
  const Rng shared = rng.split();
  Rng r_cfm = shared, r_sfm = shared;
  const double w2_cfm = w2sq_subsampled(plain.x1, target, eval, r_cfm);
  const double w2_sfm = w2sq_subsampled(sw.x1, target, eval, r_sfm);
  v.add("w2sq_sfm", w2_sfm < w2_cfm, w2_sfm, "< OT-CFM " + fmt(w2_cfm));

  std::vector<double> masses;
  double gap_mass = 0.0;
  support_masses(sw.x1, data.target, eval.support_tol, masses, gap_mass);
  const double want[2] = {1.0 / 3.0, 2.0 / 3.0};
  for (std::size_t k = 0; k < masses.size() && k < 2; ++k) {
    v.add("sfm_mode_" + std::to_string(k) + "_mass", std::abs(masses[k] - want[k]) <= 0.05, masses[k],
          fmt(want[k]) + " +- 0.05");
  }

  // groups ordered by population; the two largest carry the crossing
  std::vector<std::pair<std::size_t, SwitchSignal>> groups;
  for (int i = 0; i < sfm.setup.coupling.k0(); ++i) {
    for (int j = 0; j < sfm.setup.coupling.k1(); ++j) {
      const SwitchSignal s{i, j};
      const auto c = static_cast<std::size_t>(std::count(sw.s.begin(), sw.s.end(), s));
      if (c > 0) groups.emplace_back(c, s);
    }
  }
  std::sort(groups.begin(), groups.end(), [](const auto& l, const auto& r) { return l.first > r.first; });
  constexpr std::size_t cap = 48;
  double intra = std::numeric_limits<double>::infinity();
  for (const auto& [count, s] : groups) {
    if (count < 2) continue;
    intra = std::min(intra, noncross_check(sfm.model, s, group_starts(sw, s, cap), spec));
  }
  v.add("sfm_intra_group_gap", intra > 0.0, intra, "> 0");
  if (groups.size() >= 2) {
    const double inter = cross_group_gap(sfm.model, group_starts(sw, groups[0].second, cap), groups[0].second,
                                         group_starts(sw, groups[1].second, cap), groups[1].second, spec);
    v.add("sfm_inter_group_gap", inter < 0.05 * a, inter, "< " + fmt(0.05 * a));
  } else {
    v.add("sfm_inter_group_gap", false, NAN, "two populated groups");
  }
  return v;
}

Verdict verify_lipschitz_trend(std::span<const double> a, std::span<const double> cfm, std::span<const double> sfm) {
  if (a.size() != cfm.size() || a.size() != sfm.size() || a.empty()) {
    throw Error("Lipschitz trend needs one CFM and one SFM estimate per a");
  }
  Verdict v{"prop1-lipschitz", {}, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    v.add("cfm_estimate_a=" + fmt(a[i]), i == 0 || cfm[i] > cfm[i - 1], cfm[i],
          i == 0 ? "reference" : "> " + fmt(cfm[i - 1]));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    v.add("sfm_estimate_a=" + fmt(a[i]), sfm[i] <= 3.0 * sfm[0], sfm[i], "<= " + fmt(3.0 * sfm[0]));
  }
  return v;
}

namespace {

struct NamedCoupling {
  std::string name;
  CouplingMatrix p;
};

std::vector<double> uniform(int k) { return std::vector<double>(static_cast<std::size_t>(k), 1.0 / k); }

std::vector<NamedCoupling> sampling_cases() {
  std::vector<std::vector<double>> m0{{-1.0}, {1.0}}, m1;
  for (int j = 0; j < 10; ++j) m1.push_back({-1.0 + 2.0 * j / 9.0});
  const Matrix cost = inter_cluster_cost(m0, m1, ClusterCost::MeanDistance);
  return {
      {"two2one", make_coupling_matrix(CouplingKind::K2One, uniform(2), uniform(1), nullptr)},
      {"one2ten", make_coupling_matrix(CouplingKind::One2K, uniform(1), uniform(10), nullptr)},
      {"two2ten_mixed", make_coupling_matrix(CouplingKind::Mixed, uniform(2), uniform(10), nullptr)},
      {"two2ten_extremal", make_coupling_matrix(CouplingKind::Extremal, uniform(2), uniform(10), &cost)},
  };
}

}  // namespace

Verdict verify_switching_sampling(std::size_t draws, Rng& rng) {
  Verdict v{"switching-sampling", {}, 0.0};
  for (const auto& c : sampling_cases()) {
    // synthetic labels: every label present, the rest drawn from the marginals
    const std::size_t m = 256;
    LabeledBatch batch{Matrix(m, 1), Matrix(m, 1), {}, {}};
    std::vector<double> cum0(c.p.rho0.size()), cum1(c.p.rho1.size());
    std::partial_sum(c.p.rho0.begin(), c.p.rho0.end(), cum0.begin());
    std::partial_sum(c.p.rho1.begin(), c.p.rho1.end(), cum1.begin());
    for (std::size_t i = 0; i < m; ++i) {
      batch.y0.push_back(i < cum0.size() ? static_cast<int>(i) : static_cast<int>(rng.from_cumulative(cum0)));
      batch.y1.push_back(i < cum1.size() ? static_cast<int>(i) : static_cast<int>(rng.from_cumulative(cum1)));
      batch.x0(i, 0) = static_cast<double>(i);
      batch.x1(i, 0) = static_cast<double>(i);
    }
    const auto pm = build_batch_matrix(c.p, batch.y0, batch.y1);
    const auto pairs = sample_switching_pairs(pm, batch, draws, rng);
    Matrix freq(static_cast<std::size_t>(c.p.k0()), static_cast<std::size_t>(c.p.k1()));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      freq(static_cast<std::size_t>(pairs.y0[i]), static_cast<std::size_t>(pairs.y1[i])) += 1.0 / static_cast<double>(draws);
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < freq.rows(); ++i) {
      for (std::size_t j = 0; j < freq.cols(); ++j) {
        const double p = c.p.p(i, j);
        const double dev = std::abs(freq(i, j) - p);
        if (p == 0.0) {
          worst = dev > 0.0 ? INFINITY : worst;
          continue;
        }
        worst = std::max(worst, dev / std::sqrt(p * (1.0 - p) / static_cast<double>(draws)));
      }
    }
    v.add(c.name + "_max_sigma", worst < 3.0, worst, "< 3 binomial sd");
  }
  return v;
}

Verdict verify_extremal_p(int trials, Rng& rng) {
  Verdict v{"extremal-P", {}, 0.0};
  int bad = 0;
  double worst_excess = -INFINITY, worst_marginal = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int k0 = 1 + static_cast<int>(rng.below(10)), k1 = 1 + static_cast<int>(rng.below(10));
    auto weights = [&](int k) {
      std::vector<double> w(static_cast<std::size_t>(k));
      double s = 0.0;
      for (double& x : w) s += x = 0.05 + rng.uniform();
      for (double& x : w) x /= s;
      return w;
    };
    const auto r0 = weights(k0), r1 = weights(k1);
    Matrix cost(static_cast<std::size_t>(k0), static_cast<std::size_t>(k1));
    for (double& c : cost.values()) c = rng.uniform(0.0, 10.0);
    const auto plan = solve_emd(r0, r1, cost);
    const double excess = static_cast<double>(plan.nonzeros()) - (k0 + k1 - 1);
    worst_excess = std::max(worst_excess, excess);
    bad += excess > 0 ? 1 : 0;
    for (int i = 0; i < k0; ++i) {
      double s = 0.0;
      for (int j = 0; j < k1; ++j) s += plan.plan(i, j);
      worst_marginal = std::max(worst_marginal, std::abs(s - r0[static_cast<std::size_t>(i)]));
    }
  }
  v.add("instances_over_vertex_bound", bad == 0, bad, "0 of " + std::to_string(trials));
  v.add("max_nonzeros_minus_bound", worst_excess <= 0.0, worst_excess, "<= 0");
  v.add("max_row_marginal_error", worst_marginal <= 1e-9, worst_marginal, "<= 1e-9");
  return v;
}

Verdict verify_straightness(const TrainResult& otsfm, const TrainResult& isfm, const DatasetPair& data,
                            std::size_t n, const SolverSpec& adaptive, const EvalSpec& eval, Rng& rng) {
  Verdict v{"straightness", {}, 0.0};
  const auto target = data.target.sample(n, rng).points;
  const auto ot = generate(otsfm, data.source, n, adaptive, rng, true);
  const auto ind = generate(isfm, data.source, n, adaptive, rng, true);
  const double s_ot = mean_straightness(ot.trajectories), s_ind = mean_straightness(ind.trajectories);
  v.add("ot_sfm_straightness", s_ot < s_ind, s_ot, "< I-SFM " + fmt(s_ind));

  // same starts and signals, same subsample indices: the difference is the discretization alone
  SolverSpec euler5;
  euler5.method = Method::Euler;
  euler5.steps = 5;
  Matrix coarse(n, ot.x1.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const auto end = integrate(model_field(otsfm.model, ot.s[i]), ot.source.points.row(i), euler5, false).final_state();
    std::copy(end.begin(), end.end(), coarse.row(i).begin());
  }
  const Rng shared = rng.split();
  Rng r1 = shared, r2 = shared;
  const double w2_adaptive = w2sq_subsampled(ot.x1, target, eval, r1);
  const double w2_coarse = w2sq_subsampled(coarse, target, eval, r2);
  v.add("ot_sfm_euler5_w2sq", w2_coarse <= 2.0 * w2_adaptive, w2_coarse, "<= 2 x adaptive " + fmt(w2_adaptive));
  return v;
}

}  // namespace sfm
