#include "sfm/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "sfm/error.hpp"
#include "sfm/experiment.hpp"
#include "sfm/text.hpp"

namespace sfm {

namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config, checkpoint, out, samples, trajectories, solver, id;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::optional<double> rtol, atol;
  std::optional<std::size_t> n;
  double budget = 1.0;
};

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::ofstream os(dir / name);
  if (!os) throw Error("cannot write '" + (dir / name).string() + "'");
  return os;
}

SolverSpec solver_from(const Flags& f, SolverSpec s) {
  if (!f.solver.empty()) s.method = parse_method(f.solver);
  if (f.steps) s.steps = *f.steps;
  if (f.rtol) s.rtol = *f.rtol;
  if (f.atol) s.atol = *f.atol;
  try {
    validate(s);
  } catch (const Error& e) {
    throw ConfigError(std::string("--solver: ") + e.what());
  }
  return s;
}

std::string solver_text(const SolverSpec& s) {
  std::string t = "solver=" + to_string(s.method);
  if (s.method == Method::Dopri5) {
    t += " rtol=" + format_real(s.rtol) + " atol=" + format_real(s.atol);
  } else {
    t += " steps=" + std::to_string(s.steps);
  }
  return t;
}

int cmd_train(const Flags& f, std::ostream& out) {
  if (f.config.empty()) throw ConfigError("train needs --config");
  ExperimentConfig cfg = load_config(f.config);
  if (f.seed) cfg.train.seed = *f.seed;
  if (!f.out.empty()) cfg.out = f.out;
  const std::string digest = config_digest(cfg);
  const DatasetPair data = cfg.dataset.make();
  TrainResult res = [&] {
    try {
      return train(cfg.train, data);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("training setup: ") + e.what());
    }
  }();
  auto loss = open_out(cfg.out, "loss.csv");
  write_checkpoint_file((fs::path(cfg.out) / "checkpoint.txt").string(), make_checkpoint(cfg, res));
  loss << "# config_digest=" << digest << '\n' << "iteration,loss\n";
  for (std::size_t i = 0; i < res.loss.size(); ++i) loss << i << ',' << format_real(res.loss[i]) << '\n';
  out << "config_digest " << digest << '\n';
  out << "final_loss " << (res.loss.empty() ? std::string("nan") : format_real(res.loss.back())) << '\n';
  out << "checkpoint " << (fs::path(cfg.out) / "checkpoint.txt").string() << '\n';
  return 0;
}

std::string meta_digest(const Checkpoint& ck) {
  const std::string* d = ck.find_meta("config_digest");
  return d ? *d : std::string("unknown");
}

int cmd_sample(const Flags& f, std::ostream& out) {
  if (f.checkpoint.empty()) throw ConfigError("sample needs --checkpoint");
  SolverSpec base;
  std::size_t n = 1000;
  if (!f.config.empty()) {
    const auto cfg = load_config(f.config);
    base = cfg.solver;
    n = cfg.eval_n;
  }
  const SolverSpec spec = solver_from(f, base);
  if (f.n) n = *f.n;
  if (n == 0) throw ConfigError("--n must be >= 1");
  const Checkpoint ck = read_checkpoint_file(f.checkpoint);
  const TrainResult trained = checkpoint_result(ck);
  const DatasetPair data = checkpoint_dataset(ck).make();
  if (data.source.dim() != static_cast<std::size_t>(ck.spec.dim)) {
    throw ConfigError("checkpoint model dimension does not match its dataset");
  }
  const std::uint64_t seed = f.seed.value_or(ck.seed);
  Rng rng(seed);
  const Inference inf = generate(trained, data.source, n, spec, rng, true);

  const fs::path dir = f.out.empty() ? fs::path(".") : fs::path(f.out);
  const std::string header = "# config_digest=" + meta_digest(ck) + ' ' + solver_text(spec) +
                             " n=" + std::to_string(n) + " seed=" + std::to_string(seed) + '\n';
  auto samples = open_out(dir, "samples.csv");
  samples << header;
  const std::size_t d = inf.x1.cols();
  for (std::size_t k = 0; k < d; ++k) samples << "x_" << k + 1 << ',';
  samples << "y0,y1,nfe\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : inf.x1.row(i)) samples << format_real(v) << ',';
    samples << inf.s[i].y0 << ',' << inf.s[i].y1 << ',' << inf.nfe[i] << '\n';
  }
  auto trajs = open_out(dir, "trajectories.csv");
  trajs << header;
  write_trajectories_csv(trajs, inf.trajectories);
  out << "samples " << n << '\n' << "nfe_mean " << format_real(inf.nfe_mean()) << '\n';
  return 0;
}

struct SampleFile {
  Matrix x;
  std::vector<double> nfe;
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string c;
  while (std::getline(ss, c, ',')) cells.push_back(c);
  return cells;
}

SampleFile read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read samples '" + path + "'");
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_csv(line);
    break;
  }
  std::vector<std::size_t> xcols;
  std::optional<std::size_t> nfe_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].rfind("x_", 0) == 0) xcols.push_back(c);
    if (header[c] == "nfe") nfe_col = c;
  }
  if (xcols.empty()) throw ConfigError("samples '" + path + "' have no x_ columns");
  std::vector<std::vector<double>> rows;
  SampleFile sf;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw ConfigError("samples '" + path + "': ragged row " + std::to_string(rows.size() + 1));
    std::vector<double> r;
    for (auto c : xcols) r.push_back(parse_real(cells[c]));
    rows.push_back(std::move(r));
    if (nfe_col) sf.nfe.push_back(parse_real(cells[*nfe_col]));
  }
  if (rows.empty()) throw ConfigError("samples '" + path + "' are empty");
  sf.x = Matrix::from_rows(rows);
  return sf;
}

std::vector<TrajectoryRecord> read_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read trajectories '" + path + "'");
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_csv(line);
    break;
  }
  std::vector<std::size_t> xcols;
  std::size_t id_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].rfind("x_", 0) == 0) xcols.push_back(c);
    if (header[c] == "sample_id") id_col = c;
  }
  if (header.empty() || header[0] != "t" || xcols.empty() || id_col == header.size()) {
    throw ConfigError("trajectories '" + path + "' lack the t, x_k and sample_id columns");
  }
  std::map<long, TrajectoryRecord> by_id;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw ConfigError("trajectories '" + path + "': ragged row");
    auto& tr = by_id[static_cast<long>(parse_real(cells[id_col]))];
    tr.times.push_back(parse_real(cells[0]));
    std::vector<double> x;
    for (auto c : xcols) x.push_back(parse_real(cells[c]));
    tr.states.push_back(std::move(x));
  }
  std::vector<TrajectoryRecord> out;
  for (auto& [id, tr] : by_id) out.push_back(std::move(tr));
  return out;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  if (f.samples.empty()) throw ConfigError("eval needs --samples");
  if (f.checkpoint.empty() == f.config.empty()) throw ConfigError("eval needs exactly one of --checkpoint or --config");
  std::optional<Checkpoint> ck;
  DatasetSpec ds;
  std::string digest;
  SolverSpec base;
  if (!f.checkpoint.empty()) {
    ck = read_checkpoint_file(f.checkpoint);
    ds = checkpoint_dataset(*ck);
    digest = meta_digest(*ck);
  } else {
    const auto cfg = load_config(f.config);
    ds = cfg.dataset;
    digest = config_digest(cfg);
    base = cfg.solver;
  }
  const SolverSpec spec = solver_from(f, base);
  const DatasetPair data = ds.make();
  const SampleFile sf = read_samples(f.samples);
  if (sf.x.cols() != data.target.dim()) throw ConfigError("sample dimension does not match the dataset");
  const auto trajs = f.trajectories.empty() ? std::vector<TrajectoryRecord>{} : read_trajectories(f.trajectories);

  const std::uint64_t seed = f.seed.value_or(0);
  Rng rng(seed);
  const Matrix target = data.target.sample(std::max<std::size_t>(sf.x.rows(), 512), rng).points;
  double nfe = 0.0;
  for (double v : sf.nfe) nfe += v;
  if (!sf.nfe.empty()) nfe /= static_cast<double>(sf.nfe.size());
  EvalReport r = evaluate(sf.x, target, data.target, trajs, sf.nfe.empty() ? NAN : nfe, EvalSpec{}, rng);
  if (trajs.empty()) r.action = r.straightness = NAN;
  if (ck) {
    const TrainResult trained = checkpoint_result(*ck);
    std::vector<double> center(data.source.dim(), 0.0);
    for (const auto& m : data.source.modes()) {
      const auto mm = m.mean();
      for (std::size_t k = 0; k < center.size(); ++k) center[k] += m.weight * mm[k];
    }
    double worst = 0.0;
    const auto& p = trained.setup.coupling;
    for (int i = 0; i < p.k0(); ++i) {
      for (int j = 0; j < p.k1(); ++j) {
        if (p.p(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) <= 0.0) continue;
        worst = std::max(worst, lipschitz_estimate(trained.model, {i, j}, center, 0.125, 200, spec, rng));
      }
    }
    r.lipschitz_est = worst;
  }
  const fs::path dir = f.out.empty() ? fs::path(".") : fs::path(f.out);
  auto os = open_out(dir, "eval.csv");
  os << "# config_digest=" << digest << " seed=" << seed << '\n';
  write_eval_header(os, r.mode_masses.size());
  write_eval_row(os, fs::path(f.samples).stem().string(), r);
  write_eval_header(out, r.mode_masses.size());
  write_eval_row(out, fs::path(f.samples).stem().string(), r);
  return 0;
}

int cmd_verify(const Flags& f, std::ostream& out, std::ostream& err) {
  VerifyOptions opt;
  opt.seed = f.seed.value_or(0);
  opt.budget = f.budget;
  opt.log = [&err](const std::string& m) { err << m << '\n'; };
  const Verdict v = run_verify(f.id, opt);
  const fs::path dir = f.out.empty() ? fs::path(".") : fs::path(f.out);
  auto os = open_out(dir, "verify_" + f.id + ".csv");
  os << "# config_digest=" << hex_digest("verify " + f.id + " seed=" + std::to_string(opt.seed) +
                                         " budget=" + format_real(opt.budget))
     << '\n';
  write_verdict_csv(os, v);
  for (const auto& c : v.checks) {
    out << (c.passed ? "pass " : "FAIL ") << c.name << " = " << format_real(c.value) << " (want " << c.bound << ")\n";
  }
  out << v.id << ' ' << (v.passed() ? "passed" : "failed") << '\n';
  if (!v.passed()) {
    for (const auto& msg : v.failures()) err << "failed: " << msg << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Switched flow matching experiments", "sfm"};
  app.require_subcommand(1);
  Flags f;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", f.seed, "random seed");
    sub->add_option("--out", f.out, "output directory");
  };
  auto solver = [&](CLI::App* sub) {
    sub->add_option("--solver", f.solver, "euler, rk4 or dopri5");
    sub->add_option("--steps", f.steps, "fixed-step count");
    sub->add_option("--rtol", f.rtol, "adaptive relative tolerance");
    sub->add_option("--atol", f.atol, "adaptive absolute tolerance");
  };
  auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
  train_cmd->add_option("--config", f.config, "config file")->required();
  common(train_cmd);
  auto* sample_cmd = app.add_subcommand("sample", "generate samples and trajectories from a checkpoint");
  sample_cmd->add_option("--checkpoint", f.checkpoint, "checkpoint file")->required();
  sample_cmd->add_option("--config", f.config, "config file for solver defaults");
  sample_cmd->add_option("--n", f.n, "number of samples");
  common(sample_cmd);
  solver(sample_cmd);
  auto* eval_cmd = app.add_subcommand("eval", "evaluate generated samples against the target");
  eval_cmd->add_option("--samples", f.samples, "samples CSV")->required();
  eval_cmd->add_option("--trajectories", f.trajectories, "trajectories CSV");
  eval_cmd->add_option("--checkpoint", f.checkpoint, "checkpoint file");
  eval_cmd->add_option("--config", f.config, "config file");
  common(eval_cmd);
  solver(eval_cmd);
  auto* verify_cmd = app.add_subcommand("verify", "run a proposition check");
  verify_cmd->add_option("id", f.id, "proposition id")->required();
  verify_cmd->add_option("--budget", f.budget, "multiplier on pinned iteration counts");
  common(verify_cmd);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    if (*train_cmd) return cmd_train(f, out);
    if (*sample_cmd) return cmd_sample(f, out);
    if (*eval_cmd) return cmd_eval(f, out);
    if (*verify_cmd) return cmd_verify(f, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace sfm
