#pragma once

// Minimal reverse-mode automatic differentiation over dense 2-d arrays.
//
// A Tape records every primitive in creation order, so node ids are already a
// topological order: parents always have smaller ids than their consumers.
// backward() walks ids downward from the root and visits each node once.
// Scalars are 1x1 matrices. The only implicit broadcast is add_bias().

#include <cstddef>
#include <functional>
#include <vector>

#include "sfm/error.hpp"
#include "sfm/matrix.hpp"

namespace sfm::ad {

class Tape;

/// Handle to a node recorded on a Tape.
class Value {
 public:
  Value() = default;

  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  const Matrix& data() const;
  std::size_t rows() const { return data().rows(); }
  std::size_t cols() const { return data().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

 private:
  friend class Tape;
  Value(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Per-node gradient storage produced by backward().
class Gradients {
 public:
  /// Gradient of the root w.r.t. v; a zero array if v does not influence the root.
  Matrix at(const Value& v) const;
  bool touched(const Value& v) const { return !grads_[v.id()].empty(); }

 private:
  friend Gradients backward(Tape& tape, const Value& root);
  const Tape* tape_ = nullptr;
  std::vector<Matrix> grads_;
};

class Tape {
 public:
  /// Propagates an output gradient into the gradient slots of the parents.
  using BackwardFn = std::function<void(const Matrix& out_grad, std::vector<Matrix>& grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input (parameter or input whose gradient is wanted).
  Value leaf(Matrix data);
  /// Input that never receives a gradient.
  Value constant(Matrix data);

  Value record(Matrix data, std::vector<std::size_t> parents, BackwardFn fn);

  const Matrix& data(std::size_t id) const { return nodes_[id].data; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  friend Gradients backward(Tape& tape, const Value& root);

  struct Node {
    Matrix data;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

Gradients backward(Tape& tape, const Value& root);

// Primitives. All of them check conformability and reject non-finite results.
Value matmul(const Value& a, const Value& b);
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value scale(const Value& a, double c);
/// a (r x c) plus a row vector bias (1 x c) added to every row.
Value add_bias(const Value& a, const Value& bias);
Value selu(const Value& a);
/// Column-wise concatenation of two blocks with equal row counts.
Value concat(const Value& a, const Value& b);
Value sum(const Value& a);
Value mean(const Value& a);
/// mean((a - b)^2) over all entries.
Value squared_error_mean(const Value& a, const Value& b);

inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kSeluLambda = 1.0507009873554805;

double selu(double x);

}  // namespace sfm::ad
