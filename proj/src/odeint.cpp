#include "sfm/odeint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "sfm/text.hpp"

namespace sfm {

std::string to_string(Method m) {
  switch (m) {
    case Method::Euler: return "euler";
    case Method::RK4: return "rk4";
    case Method::Dopri5: return "dopri5";
  }
  return "dopri5";
}

Method parse_method(const std::string& s) {
  for (auto m : {Method::Euler, Method::RK4, Method::Dopri5}) {
    if (to_string(m) == s) return m;
  }
  throw Error("unknown solver '" + s + "' (expected euler, rk4 or dopri5)");
}

void validate(const SolverSpec& spec) {
  if (spec.method != Method::Dopri5 && spec.steps < 1) throw Error("fixed-step solver needs steps >= 1");
  if (spec.method == Method::Dopri5) {
    if (!(spec.rtol > 0.0) || !(spec.atol > 0.0)) throw Error("adaptive solver needs rtol > 0 and atol > 0");
    if (spec.max_steps < 1 || spec.h0 < 0.0) throw Error("adaptive solver needs max_steps >= 1 and h0 >= 0");
  }
}

namespace {

using Vec = std::vector<double>;

class Integrator {
 public:
  Integrator(const Field& f, std::span<const double> x0, bool record_all)
      : f_(f), n_(x0.size()), record_all_(record_all) {
    rec_.times.push_back(0.0);
    rec_.states.emplace_back(x0.begin(), x0.end());
    x_.assign(x0.begin(), x0.end());
    for (double v : x_) {
      if (!std::isfinite(v)) throw Error("initial state is not finite");
    }
  }

  void eval(double t, const Vec& x, Vec& dx) {
    f_(t, x, dx);
    ++rec_.nfe;
  }

  void push(double t) {
    for (double v : x_) {
      if (!std::isfinite(v)) fail("state became non-finite at t=" + format_real(t));
    }
    if (record_all_ || t == 1.0) {
      rec_.times.push_back(t);
      rec_.states.push_back(x_);
    }
  }

  [[noreturn]] void fail(const std::string& why) { throw IntegrationError(why, rec_); }

  void fixed(Method m, int steps) {
    Vec k1(n_), k2(n_), k3(n_), k4(n_), tmp(n_);
    const double h = 1.0 / steps;
    for (int s = 0; s < steps; ++s) {
      const double t = s * h;
      eval(t, x_, k1);
      if (m == Method::Euler) {
        for (std::size_t i = 0; i < n_; ++i) x_[i] += h * k1[i];
      } else {
        for (std::size_t i = 0; i < n_; ++i) tmp[i] = x_[i] + 0.5 * h * k1[i];
        eval(t + 0.5 * h, tmp, k2);
        for (std::size_t i = 0; i < n_; ++i) tmp[i] = x_[i] + 0.5 * h * k2[i];
        eval(t + 0.5 * h, tmp, k3);
        for (std::size_t i = 0; i < n_; ++i) tmp[i] = x_[i] + h * k3[i];
        eval(t + h, tmp, k4);
        for (std::size_t i = 0; i < n_; ++i) x_[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      }
      push(s + 1 == steps ? 1.0 : (s + 1) * h);
    }
  }

  // Dormand-Prince 5(4), FSAL, RMS error norm.
  void dopri5(const SolverSpec& spec) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    Vec k1(n_), k2(n_), k3(n_), k4(n_), k5(n_), k6(n_), k7(n_), tmp(n_), y(n_);
    double t = 0.0;
    eval(t, x_, k1);

    double h = spec.h0;
    if (h <= 0.0) {
      double d0 = 0.0, d1 = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        const double sc = spec.atol + spec.rtol * std::abs(x_[i]);
        d0 += (x_[i] / sc) * (x_[i] / sc);
        d1 += (k1[i] / sc) * (k1[i] / sc);
      }
      d0 = std::sqrt(d0 / static_cast<double>(n_));
      d1 = std::sqrt(d1 / static_cast<double>(n_));
      h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    }
    h = std::min(h, 1.0);

    int accepted = 0;
    while (t < 1.0) {
      if (accepted >= spec.max_steps) fail("adaptive solver exceeded max_steps=" + std::to_string(spec.max_steps));
      bool last = false;
      if (t + h >= 1.0) {
        h = 1.0 - t;
        last = true;
      }
      if (h < 1e-14) fail("adaptive step size underflow at t=" + format_real(t));

      for (std::size_t i = 0; i < n_; ++i) tmp[i] = x_[i] + h * a21 * k1[i];
      eval(t + c2 * h, tmp, k2);
      for (std::size_t i = 0; i < n_; ++i) tmp[i] = x_[i] + h * (a31 * k1[i] + a32 * k2[i]);
      eval(t + c3 * h, tmp, k3);
      for (std::size_t i = 0; i < n_; ++i) tmp[i] = x_[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      eval(t + c4 * h, tmp, k4);
      for (std::size_t i = 0; i < n_; ++i) {
        tmp[i] = x_[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      }
      eval(t + c5 * h, tmp, k5);
      for (std::size_t i = 0; i < n_; ++i) {
        tmp[i] = x_[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      }
      const double t_new = last ? 1.0 : t + h;
      eval(t_new, tmp, k6);
      for (std::size_t i = 0; i < n_; ++i) {
        y[i] = x_[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
      }
      eval(t_new, y, k7);

      double err = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double sc = spec.atol + spec.rtol * std::max(std::abs(x_[i]), std::abs(y[i]));
        err += (e / sc) * (e / sc);
      }
      err = std::sqrt(err / static_cast<double>(n_));
      if (!std::isfinite(err)) fail("non-finite error estimate at t=" + format_real(t));

      if (err <= 1.0) {
        t = t_new;
        x_.swap(y);
        k1.swap(k7);
        ++accepted;
        push(t);
        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h *= factor;
      } else {
        h *= std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
      }
    }
  }

  TrajectoryRecord take() { return std::move(rec_); }

 private:
  const Field& f_;
  std::size_t n_;
  bool record_all_;
  TrajectoryRecord rec_;
  Vec x_;
};

}  // namespace

TrajectoryRecord integrate(const Field& f, std::span<const double> x0, const SolverSpec& spec, bool record_all) {
  validate(spec);
  if (x0.empty()) throw Error("cannot integrate an empty state");
  Integrator in(f, x0, record_all);
  if (spec.method == Method::Dopri5) {
    in.dopri5(spec);
  } else {
    in.fixed(spec.method, spec.steps);
  }
  return in.take();
}

Field model_field(const VectorFieldModel& model, SwitchSignal s) {
  return [&model, s](double t, std::span<const double> x, std::span<double> dx) { model.eval_point(x, t, s, dx); };
}

Field stacked_model_field(const VectorFieldModel& model, std::span<const SwitchSignal> s) {
  std::vector<SwitchSignal> sig(s.begin(), s.end());
  return [&model, sig](double t, std::span<const double> x, std::span<double> dx) {
    const std::size_t d = static_cast<std::size_t>(model.spec().dim);
    Matrix pts(sig.size(), d, std::vector<double>(x.begin(), x.end()));
    std::vector<double> ts(sig.size(), std::clamp(t, 0.0, 1.0));
    const Matrix v = model.eval(pts, ts, sig);
    std::copy(v.values().begin(), v.values().end(), dx.begin());
  };
}

double Inference::nfe_mean() const {
  if (nfe.empty()) return 0.0;
  double s = 0.0;
  for (long v : nfe) s += static_cast<double>(v);
  return s / static_cast<double>(nfe.size());
}

std::vector<int> draw_target_labels(const CouplingMatrix& p, std::span<const int> y0, Rng& rng) {
  std::vector<std::vector<double>> rows;
  for (int k = 0; k < p.k0(); ++k) {
    double mass = 0.0;
    for (std::size_t j = 0; j < p.p.cols(); ++j) mass += p.p(static_cast<std::size_t>(k), j);
    rows.push_back(mass > 0.0 ? p.row_cumulative(k) : std::vector<double>{});
  }
  std::vector<int> y1(y0.size());
  for (std::size_t i = 0; i < y0.size(); ++i) {
    if (y0[i] < 0 || y0[i] >= p.k0()) throw Error("source label out of range for P");
    const auto& cum = rows[static_cast<std::size_t>(y0[i])];
    if (cum.empty()) throw Error("coupling row " + std::to_string(y0[i]) + " has zero mass");
    y1[i] = static_cast<int>(rng.from_cumulative(cum));
  }
  return y1;
}

Inference infer(const VectorFieldModel& model, const CouplingMatrix& p, const LabeledSampler& source,
                const std::function<std::vector<int>(const LabeledPoints&)>& source_labels, std::size_t n,
                const SolverSpec& spec, Rng& rng, bool keep_trajectories) {
  if (model.spec().switching.k0 != p.k0() || model.spec().switching.k1 != p.k1()) {
    throw Error("model switching spec (" + std::to_string(model.spec().switching.k0) + "x" +
                std::to_string(model.spec().switching.k1) + ") does not match P " + p.p.shape_string());
  }
  if (source.dim() != static_cast<std::size_t>(model.spec().dim)) throw Error("source dimension does not match model");
  Inference out;
  out.source = source.sample(n, rng);
  out.source.labels = source_labels(out.source);
  const auto y1 = draw_target_labels(p, out.source.labels, rng);
  out.x1 = Matrix(n, source.dim());
  for (std::size_t i = 0; i < n; ++i) {
    const SwitchSignal s{out.source.labels[i], y1[i]};
    out.s.push_back(s);
    auto rec = integrate(model_field(model, s), out.source.points.row(i), spec, keep_trajectories);
    rec.s = s;
    const auto& end = rec.final_state();
    std::copy(end.begin(), end.end(), out.x1.row(i).begin());
    out.nfe.push_back(rec.nfe);
    if (keep_trajectories) out.trajectories.push_back(std::move(rec));
  }
  return out;
}

double log_density(const Field& f, std::size_t dim, const std::function<double(std::span<const double>)>& log_q0,
                   std::span<const double> x1, const SolverSpec& spec) {
  if (dim > 3) throw Error("exact-trace log density supports d <= 3, got " + std::to_string(dim));
  if (x1.size() != dim) throw Error("point dimension does not match field dimension");
  constexpr double h = 1e-5;
  // augmented state [x, integral of trace], reverse time tau = 1 - t
  Field aug = [&](double tau, std::span<const double> z, std::span<double> dz) {
    const double t = 1.0 - tau;
    std::vector<double> x(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(dim)), v(dim), vp(dim), vm(dim);
    f(t, x, v);
    double tr = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double keep = x[k];
      x[k] = keep + h;
      f(t, x, vp);
      x[k] = keep - h;
      f(t, x, vm);
      x[k] = keep;
      tr += (vp[k] - vm[k]) / (2.0 * h);
    }
    for (std::size_t k = 0; k < dim; ++k) dz[k] = -v[k];
    dz[dim] = tr;
  };
  std::vector<double> z0(x1.begin(), x1.end());
  z0.push_back(0.0);
  auto rec = integrate(aug, z0, spec, false);
  const auto& zend = rec.final_state();
  std::vector<double> x0(zend.begin(), zend.begin() + static_cast<std::ptrdiff_t>(dim));
  return log_q0(x0) - zend[dim];
}

namespace {

struct StackedRun {
  std::vector<double> times;
  std::vector<Matrix> states;
};

StackedRun run_stacked(const VectorFieldModel& model, const Matrix& x0, std::span<const SwitchSignal> s,
                       const SolverSpec& spec) {
  auto rec = integrate(stacked_model_field(model, s), x0.values(), spec, true);
  StackedRun out;
  out.times = rec.times;
  for (auto& st : rec.states) out.states.emplace_back(x0.rows(), x0.cols(), std::move(st));
  return out;
}

}  // namespace

double noncross_check(const VectorFieldModel& model, SwitchSignal s, const Matrix& x0, const SolverSpec& spec) {
  if (x0.rows() < 2) throw Error("non-crossing check needs at least two trajectories");
  std::vector<SwitchSignal> sig(x0.rows(), s);
  auto run = run_stacked(model, x0, sig, spec);
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& st : run.states) {
    for (std::size_t i = 0; i < st.rows(); ++i) {
      for (std::size_t j = i + 1; j < st.rows(); ++j) gap = std::min(gap, std::sqrt(squared_distance(st.row(i), st.row(j))));
    }
  }
  return gap;
}

double cross_group_gap(const VectorFieldModel& model, const Matrix& xa, SwitchSignal sa, const Matrix& xb,
                       SwitchSignal sb, const SolverSpec& spec) {
  if (xa.cols() != xb.cols() || xa.rows() == 0 || xb.rows() == 0) throw Error("cross-group gap needs two groups");
  Matrix x0(xa.rows() + xb.rows(), xa.cols());
  std::vector<SwitchSignal> sig;
  for (std::size_t i = 0; i < xa.rows(); ++i) {
    std::copy(xa.row(i).begin(), xa.row(i).end(), x0.row(i).begin());
    sig.push_back(sa);
  }
  for (std::size_t i = 0; i < xb.rows(); ++i) {
    std::copy(xb.row(i).begin(), xb.row(i).end(), x0.row(xa.rows() + i).begin());
    sig.push_back(sb);
  }
  auto run = run_stacked(model, x0, sig, spec);
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& st : run.states) {
    for (std::size_t i = 0; i < xa.rows(); ++i) {
      for (std::size_t j = xa.rows(); j < st.rows(); ++j) {
        gap = std::min(gap, std::sqrt(squared_distance(st.row(i), st.row(j))));
      }
    }
  }
  return gap;
}

void write_trajectories_csv(std::ostream& os, const std::vector<TrajectoryRecord>& trajs) {
  const std::size_t d = trajs.empty() ? 0 : trajs.front().states.front().size();
  os << 't';
  for (std::size_t k = 0; k < d; ++k) os << ",x_" << k + 1;
  os << ",sample_id,y0,y1,nfe\n";
  for (std::size_t id = 0; id < trajs.size(); ++id) {
    const auto& tr = trajs[id];
    for (std::size_t r = 0; r < tr.times.size(); ++r) {
      os << format_real(tr.times[r]);
      for (double v : tr.states[r]) os << ',' << format_real(v);
      os << ',' << id << ',' << tr.s.y0 << ',' << tr.s.y1 << ',' << tr.nfe << '\n';
    }
  }
}

}  // namespace sfm
