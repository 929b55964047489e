// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "sfm/discrete_ot.hpp"
#include "sfm/experiment.hpp"
#include "support.hpp"

using namespace sfm;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) passed = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// checks in `info` are reported but do not decide the criterion
Outcome from_verdict(const Verdict& v, const std::vector<std::string>& info = {}) {
  Outcome o;
  for (const auto& c : v.checks) {
    const std::string line = c.name + "=" + num(c.value) + " (" + c.bound + ")";
    if (std::find(info.begin(), info.end(), c.name) != info.end()) {
      if (!o.detail.empty()) o.detail += "; ";
      o.detail += "info " + line + (c.passed ? "" : " not met");
    } else {
      o.require(c.passed, line);
    }
  }
  return o;
}

Outcome autodiff() {
  Outcome o;
  Rng rng(1);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t d_in = 1 + rng.below(4), d_out = 1 + rng.below(4), hidden = 2 + rng.below(6);
    worst = std::max(worst, testing::mlp_gradient_error(testing::random_mlp(rng, d_in, hidden, d_out, 5)));
  }
  o.require(worst < 1e-4, "worst relative gradient error " + num(worst) + " over 100 MLPs (< 1e-4)");
  return o;
}

std::vector<double> random_weights(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  double s = 0.0;
  for (double& v : w) s += v = rng.uniform(0.05, 1.0);
  for (double& v : w) v /= s;
  return w;
}

double tree_count(std::size_t n, std::size_t m) {
  return std::pow(static_cast<double>(n), static_cast<double>(m - 1)) *
         std::pow(static_cast<double>(m), static_cast<double>(n - 1));
}

Outcome exact_ot() {
  Outcome o;
  Rng rng(2);
  double worst_gap = 0.0, worst_1d = 0.0;
  int sparse_fail = 0, one_d = 0;
  for (int t = 0; t < 200; ++t) {
    std::size_t n = 1 + rng.below(6), m = 1 + rng.below(6);
    while (n * m > 36) m = 1 + rng.below(6);
    std::vector<double> a, b;
    Matrix cost;
    const bool line = t % 4 == 0;
    if (line || tree_count(n, m) > 2e5) {
      // uniform square: the permutation oracle applies
      m = n;
      a = b = std::vector<double>(n, 1.0 / static_cast<double>(n));
    } else {
      a = random_weights(n, rng);
      b = random_weights(m, rng);
    }
    Matrix x, y;
    if (line) {
      x = testing::random_matrix(n, 1, rng);
      y = testing::random_matrix(m, 1, rng);
      cost = squared_cost(x, y);
    } else {
      cost = testing::random_matrix(n, m, rng, 0.0, 1.0);
    }
    const auto p = solve_emd(a, b, cost);
    worst_gap = std::max(worst_gap, std::abs(p.cost - brute_force_emd(a, b, cost).cost));
    sparse_fail += p.nonzeros() > n + m - 1 ? 1 : 0;
    if (line) {
      ++one_d;
      worst_1d = std::max(worst_1d, std::abs(p.cost - solve_1d_monotone(x.values(), y.values()).cost));
    }
  }
  o.require(worst_gap <= 1e-9, "max |EMD - brute force| " + num(worst_gap) + " over 200 instances (<= 1e-9)");
  o.require(sparse_fail == 0, std::to_string(sparse_fail) + " plans above n+m-1 nonzeros");
  o.require(worst_1d <= 1e-9, "max |EMD - monotone| " + num(worst_1d) + " over " + std::to_string(one_d) + " 1-d instances");
  return o;
}

SolverSpec fixed(Method m, int steps) {
  SolverSpec s;
  s.method = m;
  s.steps = steps;
  return s;
}

double slope(const std::vector<int>& steps, const std::vector<double>& err) {
  // least squares of log err on log steps
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double x = std::log(steps[i]), y = std::log(err[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Outcome solver_orders() {
  Outcome o;
  Field f = [](double, std::span<const double> x, std::span<double> dx) { dx[0] = x[0]; };
  std::vector<double> x0{1.0};
  auto err = [&](const SolverSpec& s) { return std::abs(integrate(f, x0, s).final_state()[0] - std::numbers::e); };
  const std::vector<int> rk_steps{8, 16, 32, 64}, eu_steps{100, 200, 400, 800};
  std::vector<double> rk, eu;
  bool nfe_ok = true;
  for (int s : rk_steps) {
    rk.push_back(err(fixed(Method::RK4, s)));
    nfe_ok = nfe_ok && integrate(f, x0, fixed(Method::RK4, s)).nfe == 4L * s;
  }
  for (int s : eu_steps) {
    eu.push_back(err(fixed(Method::Euler, s)));
    nfe_ok = nfe_ok && integrate(f, x0, fixed(Method::Euler, s)).nfe == s;
  }
  const double rk_slope = slope(rk_steps, rk), eu_slope = slope(eu_steps, eu);
  o.require(std::abs(rk_slope - 4.0) <= 0.3, "rk4 slope " + num(rk_slope) + " (4 +- 0.3)");
  o.require(std::abs(eu_slope - 1.0) <= 0.2, "euler slope " + num(eu_slope) + " (1 +- 0.2)");
  SolverSpec tight;
  tight.rtol = tight.atol = 1e-8;
  const auto rec = integrate(f, x0, tight);
  const double e = std::abs(rec.final_state()[0] - std::numbers::e);
  o.require(e < 1e-6, "dopri5 endpoint error " + num(e) + " (< 1e-6)");
  // counted evaluations: one initial, six per attempted step
  long counted = 0;
  Field counting = [&](double t, std::span<const double> x, std::span<double> dx) {
    ++counted;
    f(t, x, dx);
  };
  const auto rec2 = integrate(counting, x0, tight);
  nfe_ok = nfe_ok && rec2.nfe == counted && (rec2.nfe - 1) % 6 == 0;
  o.require(nfe_ok, "NFE equals counted field calls (dopri5 " + std::to_string(rec2.nfe) + ")");
  return o;
}

Outcome log_density_checks() {
  Outcome o;
  SolverSpec tight;
  tight.rtol = tight.atol = 1e-8;
  auto log_q0 = [](std::span<const double> x) { return -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * x[0] * x[0]; };
  Field zero = [](double, std::span<const double>, std::span<double> dx) { dx[0] = 0.0; };
  Field grow = [](double, std::span<const double> x, std::span<double> dx) { dx[0] = x[0]; };
  double worst_id = 0.0;
  for (double x : {-2.0, -0.3, 0.0, 1.7}) {
    std::vector<double> p{x};
    worst_id = std::max(worst_id, std::abs(log_density(zero, 1, log_q0, p, tight) - log_q0(p)));
  }
  o.require(worst_id == 0.0, "identity flow deviation " + num(worst_id) + " (exact)");
  std::vector<double> origin{0.0};
  const double want = -0.5 * std::log(2.0 * std::numbers::pi) - 1.0;
  const double got = std::abs(log_density(grow, 1, log_q0, origin, tight) - want);
  o.require(got < 1e-3, "scaled Gaussian log-density error " + num(got) + " (< 1e-3)");
  SolverSpec loose;
  loose.rtol = loose.atol = 1e-6;
  double mass = 0.0;
  const double dx = 0.1;
  for (int k = -200; k <= 200; ++k) {
    std::vector<double> p{k * dx};
    mass += std::exp(log_density(grow, 1, log_q0, p, loose)) * dx;
  }
  o.require(std::abs(mass - 1.0) < 1e-2, "quadrature mass " + num(mass) + " (1 +- 1e-2)");
  return o;
}

Outcome dumb_variable() {
  Outcome o;
  for (const char* pair : {"I", "OT"}) {
    const std::string plain = std::string("family = ") + pair + "-CFM\ndataset = prop1\niters = 300\n";
    const std::string switched = std::string("family = ") + pair + "-SFM\ndataset = prop1\niters = 300\nK0 = 1\nK1 = 1\n";
    std::istringstream pc(plain), sc(switched);
    const auto cfg_p = parse_config(pc), cfg_s = parse_config(sc);
    const auto data = cfg_p.dataset.make();
    const auto rp = train(cfg_p.train, data), rs = train(cfg_s.train, data);
    std::ostringstream kp, ks;
    write_checkpoint(kp, make_checkpoint(cfg_p, rp));
    write_checkpoint(ks, make_checkpoint(cfg_s, rs));
    o.require(rp.loss == rs.loss, std::string(pair) + " loss traces bit-identical over " + std::to_string(rp.loss.size()));
    o.require(kp.str() == ks.str(), std::string(pair) + " checkpoints bit-identical");
  }
  return o;
}

Outcome verify(const char* id, const std::vector<std::string>& info = {}) {
  VerifyOptions opt;
  opt.seed = 0;
  return from_verdict(run_verify(id, opt), info);
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"autodiff gradients", 60, autodiff},
      {"exact OT vs brute force", 60, exact_ot},
      {"switching-coupling unbiasedness", 60,
       [] {
         Rng rng(3);
         return from_verdict(verify_switching_sampling(100000, rng));
       }},
      {"Dirac split (corollary 1)", 600, [] { return verify("corollary1"); }},
      {"segment to lines (prop 3)", 900, [] { return verify("prop3-infinite", {"cfm_mean_vertical_drift"}); }},
      {"crossing coupling (prop 2)", 900, [] { return verify("prop2-crossing"); }},
      {"Lipschitz trend (prop 1)", 1200, [] { return verify("prop1-lipschitz"); }},
      {"straightness and Euler-5", 1800, [] { return verify("straightness"); }},
      {"ODE solver orders", 60, solver_orders},
      {"log-density", 120, log_density_checks},
      {"single-state reduction", 600, dumb_variable},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.require(secs < c.limit_s, "runtime " + num(secs) + "s (< " + num(c.limit_s) + "s)");
    failed += o.passed ? 0 : 1;
    std::printf("%s [%zu] %s: %s\n", o.passed ? "PASS" : "FAIL", i + 1, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
