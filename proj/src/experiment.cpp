#include "sfm/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sfm/error.hpp"
#include "sfm/text.hpp"

namespace sfm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double real_value(const std::string& key, const std::string& v) {
  try {
    return parse_real(v);
  } catch (const Error&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

long long int_value(const std::string& key, const std::string& v, long long lo) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
  if (out < lo) throw ConfigError("key '" + key + "': must be >= " + std::to_string(lo));
  return out;
}

/// Rows split by ';', entries by ',' or blanks.
Matrix matrix_value(const std::string& key, const std::string& v) {
  std::vector<std::vector<double>> rows;
  std::stringstream rs(v);
  std::string row;
  while (std::getline(rs, row, ';')) {
    for (char& c : row) c = c == ',' ? ' ' : c;
    std::istringstream es(row);
    std::vector<double> r;
    std::string tok;
    while (es >> tok) r.push_back(real_value(key, tok));
    if (r.empty()) throw ConfigError("key '" + key + "': empty row");
    if (!rows.empty() && r.size() != rows.front().size()) throw ConfigError("key '" + key + "': ragged rows");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ConfigError("key '" + key + "': empty matrix");
  return Matrix::from_rows(rows);
}

const std::set<std::string>& dataset_names() {
  static const std::set<std::string> names{"prop1", "prop2", "prop3", "8gauss-checkerboard", "gmm2"};
  return names;
}

std::string cost_name(ClusterCost c) { return c == ClusterCost::Uniform ? "uniform" : "mean-distance"; }

std::string labels_name(LabelMode m) {
  switch (m) {
    case LabelMode::Auto: return "auto";
    case LabelMode::Analytic: return "analytic";
    case LabelMode::KMeans: return "kmeans";
  }
  return "auto";
}

std::string matrix_text(const Matrix& m) {
  std::string s = std::to_string(m.rows()) + ' ' + std::to_string(m.cols());
  for (double v : m.values()) s += ' ' + format_real(v);
  return s;
}

Matrix parse_matrix_text(const std::string& key, const std::string& s) {
  std::istringstream is(s);
  std::size_t r = 0, c = 0;
  if (!(is >> r >> c)) throw Error("checkpoint meta '" + key + "' is malformed");
  Matrix m(r, c);
  std::string tok;
  for (double& v : m.values()) {
    if (!(is >> tok)) throw Error("checkpoint meta '" + key + "' is truncated");
    v = parse_real(tok);
  }
  return m;
}

std::string vector_text(const std::vector<double>& v) {
  std::string s = std::to_string(v.size());
  for (double x : v) s += ' ' + format_real(x);
  return s;
}

std::vector<double> parse_vector_text(const std::string& key, const std::string& s) {
  const Matrix m = parse_matrix_text(key, "1 " + s);
  return m.values();
}

}  // namespace

DatasetPair DatasetSpec::make() const {
  auto need_none = [&](const char* what, const std::optional<double>& v) {
    if (v) throw ConfigError("key '" + std::string(what) + "' does not apply to dataset " + name);
  };
  if (name == "prop1" || name == "prop2" || name == "gmm2") {
    need_none("scale", scale);
    need_none("mode_sigma", mode_sigma);
    if (name == "prop1") return make_prop1(a.value_or(1.0), b.value_or(0.25));
    if (name == "prop2") return make_prop2(a.value_or(3.0), b.value_or(0.3));
    return make_gmm2(a.value_or(2.0), b.value_or(0.5));
  }
  if (name == "prop3") {
    need_none("a", a);
    need_none("b", b);
    need_none("scale", scale);
    need_none("mode_sigma", mode_sigma);
    return make_prop3();
  }
  if (name == "8gauss-checkerboard") {
    need_none("a", a);
    need_none("b", b);
    return make_8gauss_checkerboard(scale.value_or(2.0), mode_sigma.value_or(0.25));
  }
  throw ConfigError("key 'dataset': unknown dataset '" + name + "'");
}

ExperimentConfig parse_config(std::istream& is, const std::string& origin) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
    if (v.empty()) throw ConfigError("key '" + key + "': empty value");
    if (!seen.insert(key).second) throw ConfigError("key '" + key + "' given twice");
    auto& t = cfg.train;
    try {
      if (key == "family") {
        t.family = parse_family(v);
      } else if (key == "dataset") {
        if (!dataset_names().count(v)) throw ConfigError("key 'dataset': unknown dataset '" + v + "'");
        cfg.dataset.name = v;
      } else if (key == "a") {
        cfg.dataset.a = real_value(key, v);
      } else if (key == "b") {
        cfg.dataset.b = real_value(key, v);
      } else if (key == "scale") {
        cfg.dataset.scale = real_value(key, v);
      } else if (key == "mode_sigma") {
        cfg.dataset.mode_sigma = real_value(key, v);
      } else if (key == "K0") {
        t.coupling.k0 = static_cast<int>(int_value(key, v, 1));
      } else if (key == "K1") {
        t.coupling.k1 = static_cast<int>(int_value(key, v, 1));
      } else if (key == "coupling") {
        t.coupling.kind = parse_coupling_kind(v);
      } else if (key == "coupling_cost") {
        if (v != "mean-distance" && v != "uniform") {
          throw ConfigError("key 'coupling_cost': expected mean-distance or uniform");
        }
        t.coupling.cost = v == "uniform" ? ClusterCost::Uniform : ClusterCost::MeanDistance;
      } else if (key == "P") {
        t.coupling.custom = matrix_value(key, v);
      } else if (key == "labels") {
        if (v == "auto") {
          t.coupling.labels = LabelMode::Auto;
        } else if (v == "analytic") {
          t.coupling.labels = LabelMode::Analytic;
        } else if (v == "kmeans") {
          t.coupling.labels = LabelMode::KMeans;
        } else {
          throw ConfigError("key 'labels': expected auto, analytic or kmeans");
        }
      } else if (key == "m") {
        t.batch = static_cast<std::size_t>(int_value(key, v, 1));
      } else if (key == "iters") {
        t.iters = static_cast<int>(int_value(key, v, 0));
      } else if (key == "lr") {
        t.lr = real_value(key, v);
        if (!(t.lr > 0.0)) throw ConfigError("key 'lr': must be > 0");
      } else if (key == "sigma") {
        t.sigma = real_value(key, v);
        if (!(t.sigma >= 0.0)) throw ConfigError("key 'sigma': must be >= 0");
      } else if (key == "seed") {
        t.seed = static_cast<std::uint64_t>(int_value(key, v, 0));
      } else if (key == "hidden") {
        t.hidden = static_cast<int>(int_value(key, v, 1));
      } else if (key == "depth") {
        t.depth = static_cast<int>(int_value(key, v, 1));
      } else if (key == "fit_samples") {
        t.fit_samples = static_cast<std::size_t>(int_value(key, v, 1));
      } else if (key == "joint_k") {
        t.joint_k = static_cast<int>(int_value(key, v, 1));
      } else if (key == "baseline_iters") {
        t.baseline_iters = static_cast<int>(int_value(key, v, 0));
      } else if (key == "solver") {
        cfg.solver.method = parse_method(v);
      } else if (key == "steps") {
        cfg.solver.steps = static_cast<int>(int_value(key, v, 1));
      } else if (key == "rtol") {
        cfg.solver.rtol = real_value(key, v);
      } else if (key == "atol") {
        cfg.solver.atol = real_value(key, v);
      } else if (key == "max_steps") {
        cfg.solver.max_steps = static_cast<int>(int_value(key, v, 1));
      } else if (key == "eval_n") {
        cfg.eval_n = static_cast<std::size_t>(int_value(key, v, 1));
      } else if (key == "out") {
        cfg.out = v;
      } else {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError("key '" + key + "': " + e.what());
    }
  }

  for (const char* req : {"family", "dataset"}) {
    if (!seen.count(req)) throw ConfigError("missing required key '" + std::string(req) + "'");
  }
  const auto& c = cfg.train.coupling;
  if (is_cfm(cfg.train.family) && (c.k0 != 1 || c.k1 != 1)) {
    throw ConfigError("key 'K0'/'K1': " + to_string(cfg.train.family) + " requires K0 = K1 = 1");
  }
  if (is_joint(cfg.train.family) && (seen.count("K0") || seen.count("K1") || seen.count("coupling") || seen.count("P"))) {
    throw ConfigError("key 'joint_k': " + to_string(cfg.train.family) + " derives its coupling from joint clusters");
  }
  if (c.kind == CouplingKind::Custom) {
    if (!c.custom) throw ConfigError("key 'P': required when coupling = custom");
    if (c.custom->rows() != static_cast<std::size_t>(c.k0) || c.custom->cols() != static_cast<std::size_t>(c.k1)) {
      throw ConfigError("key 'P': shape " + c.custom->shape_string() + " does not match K0 x K1");
    }
  } else if (c.custom) {
    throw ConfigError("key 'P': only used with coupling = custom");
  }
  try {
    validate(cfg.solver);
  } catch (const Error& e) {
    throw ConfigError(std::string("key 'solver': ") + e.what());
  }
  cfg.dataset.make();  // dataset parameters
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return parse_config(in, path);
}

std::string canonical_config(const ExperimentConfig& cfg) {
  const auto& t = cfg.train;
  Family fam = t.family;
  if (fam == Family::ICFM) fam = Family::ISFM;
  if (fam == Family::OTCFM) fam = Family::OTSFM;
  std::ostringstream os;
  auto put = [&](const char* k, const std::string& v) { os << k << '=' << v << '\n'; };
  put("family", to_string(fam));
  put("dataset", cfg.dataset.name);
  if (cfg.dataset.a) put("a", format_real(*cfg.dataset.a));
  if (cfg.dataset.b) put("b", format_real(*cfg.dataset.b));
  if (cfg.dataset.scale) put("scale", format_real(*cfg.dataset.scale));
  if (cfg.dataset.mode_sigma) put("mode_sigma", format_real(*cfg.dataset.mode_sigma));
  put("K0", std::to_string(t.coupling.k0));
  put("K1", std::to_string(t.coupling.k1));
  put("coupling", to_string(t.coupling.kind));
  put("coupling_cost", cost_name(t.coupling.cost));
  if (t.coupling.custom) put("P", matrix_text(*t.coupling.custom));
  put("labels", labels_name(t.coupling.labels));
  put("m", std::to_string(t.batch));
  put("iters", std::to_string(t.iters));
  put("lr", format_real(t.lr));
  put("sigma", format_real(t.sigma));
  put("seed", std::to_string(t.seed));
  put("hidden", std::to_string(t.hidden));
  put("depth", std::to_string(t.depth));
  put("fit_samples", std::to_string(t.fit_samples));
  if (is_joint(t.family)) {
    put("joint_k", std::to_string(t.joint_k));
    put("baseline_iters", std::to_string(t.baseline_iters));
  }
  put("solver", to_string(cfg.solver.method));
  if (cfg.solver.method == Method::Dopri5) {
    put("rtol", format_real(cfg.solver.rtol));
    put("atol", format_real(cfg.solver.atol));
    put("max_steps", std::to_string(cfg.solver.max_steps));
  } else {
    put("steps", std::to_string(cfg.solver.steps));
  }
  put("eval_n", std::to_string(cfg.eval_n));
  return os.str();
}

std::string config_digest(const ExperimentConfig& cfg) { return hex_digest(canonical_config(cfg)); }

namespace {

const char* labeler_kind_name(Labeler::Kind k) {
  switch (k) {
    case Labeler::Kind::Constant: return "constant";
    case Labeler::Kind::Analytic: return "analytic";
    case Labeler::Kind::Clusters: return "clusters";
  }
  return "constant";
}

void put_labeler(Checkpoint& ck, const std::string& side, const Labeler& l) {
  ck.meta.emplace_back("switch." + side + ".kind", labeler_kind_name(l.kind));
  ck.meta.emplace_back("switch." + side + ".k", std::to_string(l.k));
  if (l.kind == Labeler::Kind::Clusters) ck.meta.emplace_back("switch." + side + ".centers", matrix_text(l.clusters.centers));
}

const std::string& need_meta(const Checkpoint& ck, const std::string& key) {
  const std::string* v = ck.find_meta(key);
  if (!v) throw Error("checkpoint lacks meta." + key);
  return *v;
}

Labeler get_labeler(const Checkpoint& ck, const std::string& side) {
  Labeler l;
  const std::string& kind = need_meta(ck, "switch." + side + ".kind");
  l.k = static_cast<int>(parse_real(need_meta(ck, "switch." + side + ".k")));
  if (kind == "constant") {
    l.kind = Labeler::Kind::Constant;
  } else if (kind == "analytic") {
    l.kind = Labeler::Kind::Analytic;
  } else if (kind == "clusters") {
    l.kind = Labeler::Kind::Clusters;
    const std::string key = "switch." + side + ".centers";
    l.clusters.centers = parse_matrix_text(key, need_meta(ck, key));
  } else {
    throw Error("checkpoint meta switch." + side + ".kind has unknown value '" + kind + "'");
  }
  return l;
}

}  // namespace

Checkpoint make_checkpoint(const ExperimentConfig& cfg, const TrainResult& res) {
  Checkpoint ck;
  ck.spec = res.model.spec();
  ck.layers = res.model.layers();
  ck.adam = res.adam;
  ck.seed = cfg.train.seed;
  ck.iteration = static_cast<std::int64_t>(res.loss.size());
  ck.meta.emplace_back("config_digest", config_digest(cfg));
  ck.meta.emplace_back("dataset", cfg.dataset.name);
  if (cfg.dataset.a) ck.meta.emplace_back("dataset.a", format_real(*cfg.dataset.a));
  if (cfg.dataset.b) ck.meta.emplace_back("dataset.b", format_real(*cfg.dataset.b));
  if (cfg.dataset.scale) ck.meta.emplace_back("dataset.scale", format_real(*cfg.dataset.scale));
  if (cfg.dataset.mode_sigma) ck.meta.emplace_back("dataset.mode_sigma", format_real(*cfg.dataset.mode_sigma));
  put_labeler(ck, "source", res.setup.source);
  put_labeler(ck, "target", res.setup.target);
  ck.meta.emplace_back("coupling.kind", to_string(res.setup.coupling.kind));
  ck.meta.emplace_back("coupling.p", matrix_text(res.setup.coupling.p));
  ck.meta.emplace_back("coupling.rho0", vector_text(res.setup.coupling.rho0));
  ck.meta.emplace_back("coupling.rho1", vector_text(res.setup.coupling.rho1));
  return ck;
}

DatasetSpec checkpoint_dataset(const Checkpoint& ck) {
  DatasetSpec d;
  d.name = need_meta(ck, "dataset");
  auto opt = [&](const char* key) -> std::optional<double> {
    const std::string* v = ck.find_meta(key);
    return v ? std::optional<double>(parse_real(*v)) : std::nullopt;
  };
  d.a = opt("dataset.a");
  d.b = opt("dataset.b");
  d.scale = opt("dataset.scale");
  d.mode_sigma = opt("dataset.mode_sigma");
  return d;
}

SwitchingSetup checkpoint_switching(const Checkpoint& ck) {
  SwitchingSetup s;
  s.source = get_labeler(ck, "source");
  s.target = get_labeler(ck, "target");
  s.coupling.kind = parse_coupling_kind(need_meta(ck, "coupling.kind"));
  s.coupling.p = parse_matrix_text("coupling.p", need_meta(ck, "coupling.p"));
  s.coupling.rho0 = parse_vector_text("coupling.rho0", need_meta(ck, "coupling.rho0"));
  s.coupling.rho1 = parse_vector_text("coupling.rho1", need_meta(ck, "coupling.rho1"));
  validate(s.coupling);
  if (s.coupling.k0() != ck.spec.switching.k0 || s.coupling.k1() != ck.spec.switching.k1) {
    throw Error("checkpoint coupling " + s.coupling.p.shape_string() + " does not match the model's switching spec");
  }
  return s;
}

TrainResult checkpoint_result(const Checkpoint& ck) {
  return {VectorFieldModel(ck.spec, ck.layers), ck.adam, checkpoint_switching(ck), {}};
}

void write_checkpoint_file(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, ck);
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

Checkpoint read_checkpoint_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read checkpoint '" + path + "'");
  return read_checkpoint(in);
}

// ---------------------------------------------------------------------------
// pinned proposition checks

namespace {

struct Scenario {
  const VerifyOptions& opt;

  int iters(int pinned) const { return std::max(1, static_cast<int>(std::lround(pinned * opt.budget))); }

  void log(const std::string& msg) const {
    if (opt.log) opt.log(msg);
  }

  TrainConfig plain(Family f, int pinned) const {
    TrainConfig c;
    c.family = f;
    c.iters = iters(pinned);
    c.seed = opt.seed;
    return c;
  }

  TrainConfig one2two(Family f, int pinned) const {
    TrainConfig c = plain(f, pinned);
    c.coupling.k1 = 2;
    c.coupling.kind = CouplingKind::Mixed;
    return c;
  }

  TrainResult fit(const TrainConfig& c, const DatasetPair& data) const {
    log("training " + to_string(c.family) + " on " + data.source.name() + " (" + std::to_string(c.iters) +
        " iterations)");
    return train(c, data);
  }

  Rng eval_rng() const { return Rng(opt.seed + 1000); }
};

Verdict corollary1(const Scenario& sc) {
  const DatasetPair data = make_prop1(1.0, 0.0);
  const auto cfm = sc.fit(sc.plain(Family::ICFM, 2000), data);
  const auto sfm = sc.fit(sc.one2two(Family::ISFM, 2000), data);
  Rng rng = sc.eval_rng();
  return verify_corollary1(1.0, cfm, sfm, data, 1000, SolverSpec{}, rng);
}

Verdict prop3(const Scenario& sc) {
  const DatasetPair data = make_prop3();
  const auto cfm = sc.fit(sc.plain(Family::ICFM, 3000), data);
  const auto sfm = sc.fit(sc.one2two(Family::ISFM, 3000), data);
  Rng rng = sc.eval_rng();
  return verify_prop3(cfm, sfm, data, 2000, SolverSpec{}, EvalSpec{}, rng);
}

Verdict prop2(const Scenario& sc) {
  const double a = 3.0;
  const DatasetPair data = make_prop2(a, 0.3);
  const auto cfm = sc.fit(sc.plain(Family::OTCFM, 4000), data);
  TrainConfig c = sc.plain(Family::OTSFM, 4000);
  c.coupling.k0 = c.coupling.k1 = 2;
  c.coupling.kind = CouplingKind::Custom;
  // source 0 is the large mode at -a, target 1 the large mode at a
  c.coupling.custom = Matrix::from_rows({{0.0, 2.0 / 3.0}, {1.0 / 3.0, 0.0}});
  const auto sfm = sc.fit(c, data);
  SolverSpec euler;
  euler.method = Method::Euler;
  euler.steps = 100;
  Rng rng = sc.eval_rng();
  return verify_prop2_crossing(a, cfm, sfm, data, 1000, euler, EvalSpec{}, rng);
}

Verdict lipschitz(const Scenario& sc) {
  const std::vector<double> as{1.0, 2.0, 4.0};
  std::vector<double> cfm_est, sfm_est;
  Rng rng = sc.eval_rng();
  const std::vector<double> center{0.0};
  for (double a : as) {
    const DatasetPair data = make_prop1(a, 0.25);
    const auto cfm = sc.fit(sc.plain(Family::ICFM, 2000), data);
    const auto sfm = sc.fit(sc.one2two(Family::ISFM, 2000), data);
    cfm_est.push_back(lipschitz_estimate(cfm.model, {0, 0}, center, 0.125, 200, SolverSpec{}, rng));
    double worst = 0.0;
    for (int j = 0; j < 2; ++j) {
      worst = std::max(worst, lipschitz_estimate(sfm.model, {0, j}, center, 0.125, 200, SolverSpec{}, rng));
    }
    sfm_est.push_back(worst);
  }
  return verify_lipschitz_trend(as, cfm_est, sfm_est);
}

Verdict straightness(const Scenario& sc) {
  const DatasetPair data = make_8gauss_checkerboard(2.0, 0.25);
  TrainConfig c = sc.plain(Family::OTSFM, 3000);
  c.coupling.k0 = c.coupling.k1 = 8;
  c.coupling.kind = CouplingKind::Extremal;
  const auto ot = sc.fit(c, data);
  c.family = Family::ISFM;
  const auto ind = sc.fit(c, data);
  Rng rng = sc.eval_rng();
  return verify_straightness(ot, ind, data, 1000, SolverSpec{}, EvalSpec{}, rng);
}

}  // namespace

const std::vector<std::string>& verify_ids() {
  static const std::vector<std::string> ids{"corollary1",          "prop1-lipschitz", "prop2-crossing", "prop3-infinite",
                                            "switching-sampling", "extremal-P",      "straightness"};
  return ids;
}

Verdict run_verify(const std::string& id, const VerifyOptions& opt) {
  if (!(opt.budget > 0.0)) throw ConfigError("verify budget must be > 0");
  const auto start = std::chrono::steady_clock::now();
  const Scenario sc{opt};
  Verdict v;
  if (id == "corollary1") {
    v = corollary1(sc);
  } else if (id == "prop1-lipschitz") {
    v = lipschitz(sc);
  } else if (id == "prop2-crossing") {
    v = prop2(sc);
  } else if (id == "prop3-infinite") {
    v = prop3(sc);
  } else if (id == "switching-sampling") {
    Rng rng = sc.eval_rng();
    v = verify_switching_sampling(100000, rng);
  } else if (id == "extremal-P") {
    Rng rng = sc.eval_rng();
    v = verify_extremal_p(50, rng);
  } else if (id == "straightness") {
    v = straightness(sc);
  } else {
    std::string known;
    for (const auto& k : verify_ids()) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("unknown proposition id '" + id + "' (expected one of " + known + ")");
  }
  v.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return v;
}

}  // namespace sfm
