#include "sfm/model.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "sfm/error.hpp"

namespace sfm {

std::vector<double> encode_switch(SwitchSignal s, const SwitchSpec& spec) {
  if (s.y0 < 0 || s.y0 >= spec.k0 || s.y1 < 0 || s.y1 >= spec.k1) {
    throw Error("switch label (" + std::to_string(s.y0) + "," + std::to_string(s.y1) +
                ") out of range for K0=" + std::to_string(spec.k0) +
                ", K1=" + std::to_string(spec.k1));
  }
  std::vector<double> enc(static_cast<std::size_t>(spec.k0 + spec.k1), 0.0);
  enc[static_cast<std::size_t>(s.y0)] = 1.0;
  enc[static_cast<std::size_t>(spec.k0 + s.y1)] = 1.0;
  return enc;
}

VectorFieldModel::VectorFieldModel(const ModelSpec& spec, Rng& rng) : spec_(spec) {
  if (spec.dim < 1 || spec.hidden < 1 || spec.depth < 1 || spec.switching.k0 < 1 ||
      spec.switching.k1 < 1) {
    throw Error("invalid model spec");
  }
  std::size_t in = static_cast<std::size_t>(spec.input_width());
  for (int l = 0; l <= spec.depth; ++l) {
    const bool last = l == spec.depth;
    const std::size_t out = last ? static_cast<std::size_t>(spec.dim) : static_cast<std::size_t>(spec.hidden);
    Layer layer{Matrix(in, out), Matrix(1, out)};
    if (!last) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
      for (double& b : layer.bias.values()) b = rng.uniform(-bound, bound);
    }
    layers_.push_back(std::move(layer));
    in = out;
  }
}

VectorFieldModel::VectorFieldModel(const ModelSpec& spec, std::vector<Layer> layers)
    : spec_(spec), layers_(std::move(layers)) {
  if (layers_.size() != static_cast<std::size_t>(spec.depth + 1)) {
    throw Error("layer count does not match model depth");
  }
  std::size_t in = static_cast<std::size_t>(spec.input_width());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::size_t out = l + 1 == layers_.size() ? static_cast<std::size_t>(spec.dim)
                                                    : static_cast<std::size_t>(spec.hidden);
    if (layers_[l].weight.rows() != in || layers_[l].weight.cols() != out ||
        layers_[l].bias.rows() != 1 || layers_[l].bias.cols() != out) {
      throw Error("layer " + std::to_string(l) + " has shape " + layers_[l].weight.shape_string() +
                  ", architecture expects (" + std::to_string(in) + "x" + std::to_string(out) + ")");
    }
    in = out;
  }
}

void VectorFieldModel::check_switch(SwitchSignal s) const {
  const auto& sw = spec_.switching;
  if (s.y0 < 0 || s.y0 >= sw.k0 || s.y1 < 0 || s.y1 >= sw.k1) {
    throw Error("switch label (" + std::to_string(s.y0) + "," + std::to_string(s.y1) +
                ") out of range for K0=" + std::to_string(sw.k0) + ", K1=" + std::to_string(sw.k1));
  }
}

Matrix VectorFieldModel::build_input(const Matrix& x, std::span<const double> t,
                                     std::span<const SwitchSignal> s) const {
  const std::size_t n = x.rows();
  const auto dim = static_cast<std::size_t>(spec_.dim);
  if (x.cols() != dim) {
    throw Error("eval_field: points have dimension " + std::to_string(x.cols()) + ", model expects " +
                std::to_string(dim));
  }
  if (t.size() != n || s.size() != n) {
    throw Error("eval_field: batch sizes disagree (x " + std::to_string(n) + ", t " +
                std::to_string(t.size()) + ", s " + std::to_string(s.size()) + ")");
  }
  const auto width = static_cast<std::size_t>(spec_.input_width());
  Matrix in(n, width);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(t[i] >= -1e-12 && t[i] <= 1.0 + 1e-12)) throw Error("eval_field: time outside [0,1]");
    check_switch(s[i]);
    for (std::size_t c = 0; c < dim; ++c) in(i, c) = x(i, c);
    in(i, dim) = t[i];
    if (spec_.conditioned()) {
      in(i, dim + 1 + static_cast<std::size_t>(s[i].y0)) = 1.0;
      in(i, dim + 1 + static_cast<std::size_t>(spec_.switching.k0 + s[i].y1)) = 1.0;
    }
  }
  return in;
}

Matrix VectorFieldModel::eval(const Matrix& x, std::span<const double> t,
                              std::span<const SwitchSignal> s) const {
  Matrix h = build_input(x, t, s);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z;
    gemm_nn(h, layers_[l].weight, z);
    const double* b = layers_[l].bias.data();
    for (std::size_t r = 0; r < z.rows(); ++r) {
      double* zr = z.data() + r * z.cols();
      for (std::size_t c = 0; c < z.cols(); ++c) zr[c] += b[c];
    }
    if (l + 1 < layers_.size()) {
      for (double& v : z.values()) v = ad::selu(v);
    }
    h = std::move(z);
  }
  return h;
}

void VectorFieldModel::eval_point(std::span<const double> x, double t, SwitchSignal s,
                                  std::span<double> out) const {
  Matrix xm(1, x.size(), std::vector<double>(x.begin(), x.end()));
  const Matrix v = eval(xm, std::span<const double>(&t, 1), std::span<const SwitchSignal>(&s, 1));
  std::copy(v.values().begin(), v.values().end(), out.begin());
}

std::vector<ad::Value> VectorFieldModel::bind(ad::Tape& tape) const {
  std::vector<ad::Value> params;
  for (const auto& layer : layers_) {
    params.push_back(tape.leaf(layer.weight));
    params.push_back(tape.leaf(layer.bias));
  }
  return params;
}

ad::Value VectorFieldModel::forward(ad::Tape& tape, std::span<const ad::Value> params,
                                    const Matrix& input) const {
  if (params.size() != 2 * layers_.size()) throw Error("forward: parameter count mismatch");
  ad::Value h = tape.constant(input);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = ad::add_bias(ad::matmul(h, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < layers_.size()) h = ad::selu(h);
  }
  return h;
}

std::vector<Matrix*> VectorFieldModel::parameters() {
  std::vector<Matrix*> p;
  for (auto& layer : layers_) {
    p.push_back(&layer.weight);
    p.push_back(&layer.bias);
  }
  return p;
}

std::vector<const Matrix*> VectorFieldModel::parameters() const {
  std::vector<const Matrix*> p;
  for (const auto& layer : layers_) {
    p.push_back(&layer.weight);
    p.push_back(&layer.bias);
  }
  return p;
}

std::vector<std::string> VectorFieldModel::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    names.push_back("layer" + std::to_string(l) + ".weight");
    names.push_back("layer" + std::to_string(l) + ".bias");
  }
  return names;
}

std::size_t VectorFieldModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

AdamState make_adam(const VectorFieldModel& model, double lr) {
  AdamState st;
  st.lr = lr;
  for (const auto* p : model.parameters()) {
    st.m.emplace_back(p->rows(), p->cols());
    st.v.emplace_back(p->rows(), p->cols());
  }
  return st;
}

void adam_step(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix> grads,
               std::span<const std::string> names) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw Error("adam_step: parameter/gradient count mismatch");
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    const std::string name = k < names.size() ? names[k] : "block " + std::to_string(k);
    if (!params[k]->same_shape(grads[k]) || !state.m[k].same_shape(grads[k])) {
      throw Error("adam_step: shape mismatch for " + name);
    }
    if (!all_finite(grads[k].values())) throw Error("adam_step: non-finite gradient in " + name);
  }
  state.step += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < grads.size(); ++k) {
    auto& theta = params[k]->values();
    auto& m = state.m[k].values();
    auto& v = state.v[k].values();
    const auto& g = grads[k].values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      theta[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

const std::string* Checkpoint::find_meta(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return &v;
  }
  return nullptr;
}

namespace {

constexpr const char* kMagic = "sfm-checkpoint";
constexpr int kVersion = 1;

void write_array(std::ostream& os, const std::string& tag, const std::string& name, const Matrix& m) {
  os << tag << ' ' << name << ' ' << m.rows() << ' ' << m.cols();
  for (double v : m.values()) os << ' ' << format_real(v);
  os << '\n';
}

Matrix read_array(std::istringstream& line, const std::string& context) {
  std::size_t r = 0, c = 0;
  if (!(line >> r >> c)) throw Error("checkpoint: malformed array header in " + context);
  std::vector<double> vals(r * c);
  std::string tok;
  for (auto& v : vals) {
    if (!(line >> tok)) throw Error("checkpoint: truncated array " + context);
    v = parse_real(tok);
  }
  return Matrix(r, c, std::move(vals));
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  os << kMagic << " v" << kVersion << '\n';
  os << "spec.dim " << ck.spec.dim << '\n';
  os << "spec.hidden " << ck.spec.hidden << '\n';
  os << "spec.depth " << ck.spec.depth << '\n';
  os << "spec.k0 " << ck.spec.switching.k0 << '\n';
  os << "spec.k1 " << ck.spec.switching.k1 << '\n';
  os << "seed " << ck.seed << '\n';
  os << "iteration " << ck.iteration << '\n';
  for (const auto& [k, v] : ck.meta) os << "meta." << k << ' ' << v << '\n';
  for (std::size_t l = 0; l < ck.layers.size(); ++l) {
    write_array(os, "param", "layer" + std::to_string(l) + ".weight", ck.layers[l].weight);
    write_array(os, "param", "layer" + std::to_string(l) + ".bias", ck.layers[l].bias);
  }
  os << "adam.lr " << format_real(ck.adam.lr) << '\n';
  os << "adam.beta1 " << format_real(ck.adam.beta1) << '\n';
  os << "adam.beta2 " << format_real(ck.adam.beta2) << '\n';
  os << "adam.eps " << format_real(ck.adam.eps) << '\n';
  os << "adam.step " << ck.adam.step << '\n';
  for (std::size_t k = 0; k < ck.adam.m.size(); ++k) {
    write_array(os, "adam.m", std::to_string(k), ck.adam.m[k]);
    write_array(os, "adam.v", std::to_string(k), ck.adam.v[k]);
  }
  os << "end\n";
}

Checkpoint read_checkpoint(std::istream& is) {
  Checkpoint ck;
  std::string line;
  if (!std::getline(is, line) || line != std::string(kMagic) + " v" + std::to_string(kVersion)) {
    throw Error("checkpoint: missing or unsupported header");
  }
  std::vector<Matrix> params;
  bool ended = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key.rfind("meta.", 0) == 0) {
      std::string rest;
      std::getline(ls, rest);
      if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
      ck.meta.emplace_back(key.substr(5), rest);
    } else if (key == "spec.dim") {
      ls >> ck.spec.dim;
    } else if (key == "spec.hidden") {
      ls >> ck.spec.hidden;
    } else if (key == "spec.depth") {
      ls >> ck.spec.depth;
    } else if (key == "spec.k0") {
      ls >> ck.spec.switching.k0;
    } else if (key == "spec.k1") {
      ls >> ck.spec.switching.k1;
    } else if (key == "seed") {
      ls >> ck.seed;
    } else if (key == "iteration") {
      ls >> ck.iteration;
    } else if (key == "param") {
      std::string name;
      ls >> name;
      params.push_back(read_array(ls, name));
    } else if (key == "adam.lr" || key == "adam.beta1" || key == "adam.beta2" || key == "adam.eps") {
      std::string tok;
      ls >> tok;
      const double v = parse_real(tok);
      if (key == "adam.lr") ck.adam.lr = v;
      if (key == "adam.beta1") ck.adam.beta1 = v;
      if (key == "adam.beta2") ck.adam.beta2 = v;
      if (key == "adam.eps") ck.adam.eps = v;
    } else if (key == "adam.step") {
      ls >> ck.adam.step;
    } else if (key == "adam.m" || key == "adam.v") {
      std::string idx;
      ls >> idx;
      (key == "adam.m" ? ck.adam.m : ck.adam.v).push_back(read_array(ls, key + " " + idx));
    } else {
      throw Error("checkpoint: unknown key '" + key + "'");
    }
    if (ls.fail()) throw Error("checkpoint: malformed line for key '" + key + "'");
  }
  if (!ended) throw Error("checkpoint: truncated (missing end marker)");
  if (params.size() % 2 != 0) throw Error("checkpoint: odd parameter block count");
  for (std::size_t k = 0; k < params.size(); k += 2) {
    ck.layers.push_back(Layer{std::move(params[k]), std::move(params[k + 1])});
  }
  // Validates the layer shapes against the spec.
  VectorFieldModel check(ck.spec, ck.layers);
  if (ck.adam.m.size() != params.size() || ck.adam.v.size() != params.size()) {
    throw Error("checkpoint: optimizer state does not match parameters");
  }
  return ck;
}

}  // namespace sfm
