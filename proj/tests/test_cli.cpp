#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sfm/cli.hpp"
#include "sfm/error.hpp"
#include "sfm/experiment.hpp"

using namespace sfm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sfm_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t data_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    ++n;
  }
  return n;
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

const char* kSplit =
    "family = I-SFM\n"
    "dataset = prop1\n"
    "a = 1\n"
    "b = 0\n"
    "K1 = 2\n"
    "coupling = mixed\n"
    "iters = 60\n"
    "m = 64\n"
    "hidden = 16\n";

}  // namespace

TEST_CASE("config schema") {
  auto cfg = parse(std::string(kSplit) + "# comment line\n\n");
  CHECK(cfg.train.coupling.k1 == 2);
  CHECK(cfg.train.batch == 64);
  CHECK(cfg.dataset.make().target.mode_count() == 2);

  CHECK_THROWS_WITH_AS(parse("family = I-CFM\n"), doctest::Contains("dataset"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("dataset = prop1\n"), doctest::Contains("family"), ConfigError);
  CHECK_THROWS_WITH_AS(parse(std::string(kSplit) + "colour = red\n"), doctest::Contains("colour"), ConfigError);
  CHECK_THROWS_WITH_AS(parse(std::string(kSplit) + "iters = 5\n"), doctest::Contains("iters"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("family = I-CFM\ndataset = prop1\nK1 = 2\n"), doctest::Contains("K0"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("family = I-SFM\ndataset = prop1\nlr = fast\n"), doctest::Contains("lr"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("family = I-SFM\ndataset = prop3\na = 2\n"), doctest::Contains("'a'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("family = I-SFM\ndataset = moons\n"), doctest::Contains("dataset"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("family = OT-SFM\ndataset = prop2\nK0 = 2\nK1 = 2\ncoupling = custom\n"),
                       doctest::Contains("P"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("family = OT-SFM\ndataset = prop2\nK0 = 2\nK1 = 2\ncoupling = custom\nP = 1,0\n"),
                       doctest::Contains("shape"), ConfigError);

  auto custom = parse("family = OT-SFM\ndataset = prop2\nK0 = 2\nK1 = 2\ncoupling = custom\nP = 0, 0.6666666666666666; 0.3333333333333333, 0\n");
  CHECK(custom.train.coupling.custom->rows() == 2);
  CHECK((*custom.train.coupling.custom)(1, 0) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("plain and single-state switched configs share a digest") {
  auto a = parse("family = I-CFM\ndataset = prop1\n");
  auto b = parse("family = I-SFM\ndataset = prop1\n");
  auto c = parse("family = OT-SFM\ndataset = prop1\n");
  CHECK(config_digest(a) == config_digest(b));
  CHECK(config_digest(a) != config_digest(c));
  auto d = parse("family = I-SFM\ndataset = prop1\nout = elsewhere\n");
  CHECK(config_digest(b) == config_digest(d));
}

TEST_CASE("train, sample and eval round trip") {
  const fs::path dir = scratch("roundtrip");
  const std::string cfg = write(dir / "split.cfg", kSplit);
  const std::string out = (dir / "run").string();

  auto r = cli({"train", "--config", cfg, "--out", out});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("final_loss") != std::string::npos);
  const std::string ck = slurp(dir / "run" / "checkpoint.txt");
  CHECK(slurp(dir / "run" / "loss.csv").rfind("# config_digest=", 0) == 0);
  CHECK(data_rows(dir / "run" / "loss.csv") == 60);

  // same seed, same checkpoint
  auto again = cli({"train", "--config", cfg, "--out", (dir / "again").string()});
  REQUIRE(again.code == 0);
  CHECK(slurp(dir / "again" / "checkpoint.txt") == ck);

  auto s = cli({"sample", "--checkpoint", (dir / "run" / "checkpoint.txt").string(), "--n", "300", "--solver",
                "euler", "--steps", "1", "--out", out});
  REQUIRE(s.code == 0);
  CHECK(s.out.find("nfe_mean 1\n") != std::string::npos);
  CHECK(data_rows(dir / "run" / "samples.csv") == 300);
  CHECK(slurp(dir / "run" / "samples.csv").rfind("# config_digest=", 0) == 0);
  CHECK(data_rows(dir / "run" / "trajectories.csv") == 600);

  auto e = cli({"eval", "--checkpoint", (dir / "run" / "checkpoint.txt").string(), "--samples",
                (dir / "run" / "samples.csv").string(), "--trajectories", (dir / "run" / "trajectories.csv").string(),
                "--out", out});
  REQUIRE(e.code == 0);
  const std::string report = slurp(dir / "run" / "eval.csv");
  CHECK(report.rfind("# config_digest=", 0) == 0);
  CHECK(report.find("nan") == std::string::npos);
  auto e2 = cli({"eval", "--checkpoint", (dir / "run" / "checkpoint.txt").string(), "--samples",
                 (dir / "run" / "samples.csv").string(), "--trajectories", (dir / "run" / "trajectories.csv").string(),
                 "--out", (dir / "eval2").string()});
  CHECK(slurp(dir / "eval2" / "eval.csv") == report);
}

TEST_CASE("sampled target labels follow P") {
  const fs::path dir = scratch("labels");
  const std::string cfg = write(dir / "split.cfg", kSplit);
  REQUIRE(cli({"train", "--config", cfg, "--out", dir.string()}).code == 0);
  const std::size_t n = 4000;
  REQUIRE(cli({"sample", "--checkpoint", (dir / "checkpoint.txt").string(), "--n", std::to_string(n), "--solver",
               "euler", "--steps", "1", "--out", dir.string()})
              .code == 0);
  std::ifstream in(dir / "samples.csv");
  std::string line;
  std::size_t ones = 0, rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'x') continue;
    ++rows;
    // x_1,y0,y1,nfe
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    ones += line[c2 + 1] == '1' ? 1 : 0;
  }
  REQUIRE(rows == n);
  const double frac = static_cast<double>(ones) / static_cast<double>(n);
  CHECK(std::abs(frac - 0.5) < 3.0 * std::sqrt(0.25 / static_cast<double>(n)));
}

TEST_CASE("target against target sits at the subsampling floor") {
  const fs::path dir = scratch("floor");
  const std::string cfg = write(dir / "c.cfg", "family = I-SFM\ndataset = 8gauss-checkerboard\n");
  auto data = parse("family = I-SFM\ndataset = 8gauss-checkerboard\n").dataset.make();
  Rng rng(42);
  auto pts = data.target.sample(1024, rng);
  {
    std::ofstream os(dir / "target.csv");
    write_samples_csv(os, pts);
  }
  auto r = cli({"eval", "--config", cfg, "--samples", (dir / "target.csv").string(), "--out", dir.string(), "--seed", "3"});
  REQUIRE(r.code == 0);
  // floor: W2 between two independent target draws
  auto other = data.target.sample(1024, rng).points;
  const double floor = w2sq_subsampled(pts.points, other, EvalSpec{}, rng);
  std::istringstream rows(r.out);
  std::string header, row;
  std::getline(rows, header);
  std::getline(rows, row);
  const double w2 = std::stod(row.substr(row.find(',') + 1));
  CHECK(w2 < 3.0 * floor);
  CHECK(w2 > floor / 3.0);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  const std::string missing = write(dir / "m.cfg", "family = I-SFM\niters = 10\n");
  auto r = cli({"train", "--config", missing, "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("dataset") != std::string::npos);

  const std::string bad = write(dir / "b.cfg", "family = I-SFM\ndataset = prop1\nK0 = 2\nK1 = 2\ncoupling = one2one\n");
  CHECK(cli({"train", "--config", bad, "--out", dir.string()}).code == 2);

  CHECK(cli({"verify", "not-a-prop"}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({}).code == 2);
  CHECK(cli({"sample", "--checkpoint", (dir / "none.txt").string()}).code == 2);

  auto v = cli({"verify", "switching-sampling", "--out", dir.string()});
  CHECK(v.code == 0);
  CHECK(v.out.find("switching-sampling passed") != std::string::npos);
  CHECK(slurp(dir / "verify_switching-sampling.csv").find("two2ten_extremal_max_sigma,pass") != std::string::npos);
  CHECK(cli({"verify", "extremal-P", "--out", dir.string()}).code == 0);
}
