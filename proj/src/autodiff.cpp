#include "sfm/autodiff.hpp"

#include <cmath>
#include <string>

namespace sfm::ad {

namespace {

void require_finite(const Matrix& m, const char* op) {
  if (!all_finite(m.values())) {
    throw Error(std::string("non-finite value produced by ") + op);
  }
}

void require_same_tape(const Value& a, const Value& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw Error("operands live on different tapes");
}

void require_same_shape(const Value& a, const Value& b, const char* op) {
  if (!a.data().same_shape(b.data())) {
    throw Error(std::string(op) + ": shape mismatch " + a.data().shape_string() + " vs " +
                b.data().shape_string());
  }
}

void accumulate(std::vector<Matrix>& grads, std::size_t id, const Matrix& g) {
  Matrix& slot = grads[id];
  if (slot.empty()) {
    slot = g;
    return;
  }
  auto& dst = slot.values();
  const auto& src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

const Matrix& Value::data() const {
  if (tape_ == nullptr) throw Error("use of an unbound autodiff value");
  return tape_->data(id_);
}

double Value::scalar() const {
  const Matrix& m = data();
  if (m.size() != 1) throw Error("scalar() on non-scalar value " + m.shape_string());
  return m.values()[0];
}

Matrix Gradients::at(const Value& v) const {
  const Matrix& g = grads_.at(v.id());
  if (!g.empty()) return g;
  return Matrix(tape_->data(v.id()).rows(), tape_->data(v.id()).cols());
}

Value Tape::leaf(Matrix data) {
  require_finite(data, "leaf");
  nodes_.push_back(Node{std::move(data), {}, {}, true});
  return Value(this, nodes_.size() - 1);
}

Value Tape::constant(Matrix data) {
  require_finite(data, "constant");
  nodes_.push_back(Node{std::move(data), {}, {}, false});
  return Value(this, nodes_.size() - 1);
}

Value Tape::record(Matrix data, std::vector<std::size_t> parents, BackwardFn fn) {
  bool needs = false;
  for (std::size_t p : parents) needs = needs || nodes_[p].needs_grad;
  nodes_.push_back(Node{std::move(data), std::move(parents), needs ? std::move(fn) : BackwardFn{},
                        needs});
  return Value(this, nodes_.size() - 1);
}

Gradients backward(Tape& tape, const Value& root) {
  if (root.tape() != &tape) throw Error("backward: root belongs to another tape");
  if (root.data().size() != 1) {
    throw Error("backward: root must be scalar, got shape " + root.data().shape_string());
  }
  Gradients out;
  out.tape_ = &tape;
  out.grads_.resize(tape.size());
  out.grads_[root.id()] = Matrix(1, 1, 1.0);
  for (std::size_t k = root.id() + 1; k-- > 0;) {
    const auto& node = tape.nodes_[k];
    if (!node.backward || out.grads_[k].empty()) continue;
    // Parents have smaller ids, so this slot is not written while it is read.
    node.backward(out.grads_[k], out.grads_);
  }
  return out;
}

Value matmul(const Value& a, const Value& b) {
  require_same_tape(a, b);
  const Matrix& A = a.data();
  const Matrix& B = b.data();
  if (A.cols() != B.rows()) {
    throw Error("matmul: shape mismatch " + A.shape_string() + " x " + B.shape_string());
  }
  Matrix out;
  gemm_nn(A, B, out);
  require_finite(out, "matmul");
  Tape* t = a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t->record(std::move(out), {ia, ib}, [t, ia, ib](const Matrix& g, std::vector<Matrix>& grads) {
    if (t->needs_grad(ia)) {
      Matrix ga;
      gemm_nt(g, t->data(ib), ga);
      accumulate(grads, ia, ga);
    }
    if (t->needs_grad(ib)) {
      Matrix gb;
      gemm_tn(t->data(ia), g, gb);
      accumulate(grads, ib, gb);
    }
  });
}

namespace {

template <class Fwd>
Value elementwise_binary(const Value& a, const Value& b, const char* name, Fwd fwd,
                         Tape::BackwardFn (*make_bwd)(Tape*, std::size_t, std::size_t)) {
  require_same_tape(a, b);
  require_same_shape(a, b, name);
  const auto& x = a.data().values();
  const auto& y = b.data().values();
  Matrix out(a.rows(), a.cols());
  auto& o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(x[i], y[i]);
  require_finite(out, name);
  Tape* t = a.tape();
  return t->record(std::move(out), {a.id(), b.id()}, make_bwd(t, a.id(), b.id()));
}

}  // namespace

Value add(const Value& a, const Value& b) {
  return elementwise_binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](Tape* t, std::size_t ia, std::size_t ib) -> Tape::BackwardFn {
        return [t, ia, ib](const Matrix& g, std::vector<Matrix>& grads) {
          if (t->needs_grad(ia)) accumulate(grads, ia, g);
          if (t->needs_grad(ib)) accumulate(grads, ib, g);
        };
      });
}

Value sub(const Value& a, const Value& b) {
  return elementwise_binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](Tape* t, std::size_t ia, std::size_t ib) -> Tape::BackwardFn {
        return [t, ia, ib](const Matrix& g, std::vector<Matrix>& grads) {
          if (t->needs_grad(ia)) accumulate(grads, ia, g);
          if (t->needs_grad(ib)) {
            Matrix neg = g;
            for (double& v : neg.values()) v = -v;
            accumulate(grads, ib, neg);
          }
        };
      });
}

Value mul(const Value& a, const Value& b) {
  return elementwise_binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](Tape* t, std::size_t ia, std::size_t ib) -> Tape::BackwardFn {
        return [t, ia, ib](const Matrix& g, std::vector<Matrix>& grads) {
          if (t->needs_grad(ia)) {
            Matrix ga = g;
            const auto& y = t->data(ib).values();
            for (std::size_t i = 0; i < y.size(); ++i) ga.values()[i] *= y[i];
            accumulate(grads, ia, ga);
          }
          if (t->needs_grad(ib)) {
            Matrix gb = g;
            const auto& x = t->data(ia).values();
            for (std::size_t i = 0; i < x.size(); ++i) gb.values()[i] *= x[i];
            accumulate(grads, ib, gb);
          }
        };
      });
}

Value scale(const Value& a, double c) {
  if (!std::isfinite(c)) throw Error("scale: non-finite factor");
  Matrix out = a.data();
  for (double& v : out.values()) v *= c;
  require_finite(out, "scale");
  Tape* t = a.tape();
  const std::size_t ia = a.id();
  return t->record(std::move(out), {ia}, [ia, c](const Matrix& g, std::vector<Matrix>& grads) {
    Matrix ga = g;
    for (double& v : ga.values()) v *= c;
    accumulate(grads, ia, ga);
  });
}

Value add_bias(const Value& a, const Value& bias) {
  require_same_tape(a, bias);
  const Matrix& A = a.data();
  const Matrix& B = bias.data();
  if (B.rows() != 1 || B.cols() != A.cols()) {
    throw Error("add_bias: shape mismatch " + A.shape_string() + " + " + B.shape_string());
  }
  Matrix out = A;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* o = out.data() + r * out.cols();
    for (std::size_t c = 0; c < out.cols(); ++c) o[c] += B.data()[c];
  }
  require_finite(out, "add_bias");
  Tape* t = a.tape();
  const std::size_t ia = a.id(), ib = bias.id();
  return t->record(std::move(out), {ia, ib}, [t, ia, ib](const Matrix& g, std::vector<Matrix>& grads) {
    if (t->needs_grad(ia)) accumulate(grads, ia, g);
    if (t->needs_grad(ib)) {
      Matrix gb(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
      }
      accumulate(grads, ib, gb);
    }
  });
}

double selu(double x) {
  return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

Value selu(const Value& a) {
  Matrix out = a.data();
  for (double& v : out.values()) v = selu(v);
  require_finite(out, "selu");
  Tape* t = a.tape();
  const std::size_t ia = a.id();
  return t->record(std::move(out), {ia}, [t, ia](const Matrix& g, std::vector<Matrix>& grads) {
    const auto& x = t->data(ia).values();
    Matrix ga = g;
    auto& gv = ga.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      gv[i] *= x[i] > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x[i]);
    }
    accumulate(grads, ia, ga);
  });
}

Value concat(const Value& a, const Value& b) {
  require_same_tape(a, b);
  const Matrix& A = a.data();
  const Matrix& B = b.data();
  if (A.rows() != B.rows()) {
    throw Error("concat: row mismatch " + A.shape_string() + " | " + B.shape_string());
  }
  const std::size_t ca = A.cols(), cb = B.cols();
  Matrix out(A.rows(), ca + cb);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < ca; ++c) out(r, c) = A(r, c);
    for (std::size_t c = 0; c < cb; ++c) out(r, ca + c) = B(r, c);
  }
  Tape* t = a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t->record(std::move(out), {ia, ib},
                   [t, ia, ib, ca, cb](const Matrix& g, std::vector<Matrix>& grads) {
                     if (t->needs_grad(ia)) {
                       Matrix ga(g.rows(), ca);
                       for (std::size_t r = 0; r < g.rows(); ++r)
                         for (std::size_t c = 0; c < ca; ++c) ga(r, c) = g(r, c);
                       accumulate(grads, ia, ga);
                     }
                     if (t->needs_grad(ib)) {
                       Matrix gb(g.rows(), cb);
                       for (std::size_t r = 0; r < g.rows(); ++r)
                         for (std::size_t c = 0; c < cb; ++c) gb(r, c) = g(r, ca + c);
                       accumulate(grads, ib, gb);
                     }
                   });
}

Value sum(const Value& a) {
  double s = 0.0;
  for (double v : a.data().values()) s += v;
  Matrix out(1, 1, s);
  require_finite(out, "sum");
  Tape* t = a.tape();
  const std::size_t ia = a.id();
  return t->record(std::move(out), {ia}, [t, ia](const Matrix& g, std::vector<Matrix>& grads) {
    const Matrix& x = t->data(ia);
    accumulate(grads, ia, Matrix(x.rows(), x.cols(), g.values()[0]));
  });
}

Value mean(const Value& a) {
  const std::size_t n = a.data().size();
  if (n == 0) throw Error("mean of an empty array");
  double s = 0.0;
  for (double v : a.data().values()) s += v;
  Matrix out(1, 1, s / static_cast<double>(n));
  require_finite(out, "mean");
  Tape* t = a.tape();
  const std::size_t ia = a.id();
  return t->record(std::move(out), {ia}, [t, ia, n](const Matrix& g, std::vector<Matrix>& grads) {
    const Matrix& x = t->data(ia);
    accumulate(grads, ia, Matrix(x.rows(), x.cols(), g.values()[0] / static_cast<double>(n)));
  });
}

Value squared_error_mean(const Value& a, const Value& b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "squared_error_mean");
  const auto& x = a.data().values();
  const auto& y = b.data().values();
  const std::size_t n = x.size();
  if (n == 0) throw Error("squared_error_mean of empty arrays");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  Matrix out(1, 1, s / static_cast<double>(n));
  require_finite(out, "squared_error_mean");
  Tape* t = a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t->record(std::move(out), {ia, ib}, [t, ia, ib, n](const Matrix& g, std::vector<Matrix>& grads) {
    const auto& xa = t->data(ia);
    const auto& xb = t->data(ib);
    const double f = 2.0 * g.values()[0] / static_cast<double>(n);
    Matrix diff(xa.rows(), xa.cols());
    for (std::size_t i = 0; i < n; ++i) diff.values()[i] = f * (xa.values()[i] - xb.values()[i]);
    if (t->needs_grad(ia)) accumulate(grads, ia, diff);
    if (t->needs_grad(ib)) {
      for (double& v : diff.values()) v = -v;
      accumulate(grads, ib, diff);
    }
  });
}

}  // namespace sfm::ad
