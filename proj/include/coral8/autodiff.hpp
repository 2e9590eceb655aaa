// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over a linear tape.
//
// Every op appends one node holding its forward value. Nodes only refer to
// earlier nodes, so walking the tape backwards from the root is a valid
// topological order. A tape serves exactly one backward pass; call clear()
// before recording the next step.

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coral8/tensor.hpp"

namespace coral8 {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape is not cleared.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& dims() const { return value().dims(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

using ParamSet = std::map<std::string, Tensor>;
using Gradients = std::map<std::string, Tensor>;

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);

  /// Trainable leaf. Binding the same name twice returns the same node.
  Var parameter(const std::string& name, const Tensor& value);

  /// Appends an op result. The backward closure is dropped when no parent
  /// requires a gradient. Throws NumericError on non-finite output.
  Var record(const char* op, Tensor value, std::vector<std::size_t> parents,
             BackwardFn backward);

  /// Propagates d(root)/d(node) to every node and returns the gradients of
  /// all bound parameters (zeros for parameters the root does not depend on).
  Gradients backward(Var root);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient reaching a node after backward(); empty when none did.
  const Tensor& grad(Var v) const { return nodes_[v.id()].grad; }
  const Tensor& grad_at(std::size_t id) const { return nodes_[id].grad; }

  /// Accumulator for a node's gradient, zero-initialised on first use.
  Tensor& grad_slot(std::size_t id);

  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;
  bool backward_done_ = false;
};

/// Looks up named parameters and binds them to a tape, either as trainable
/// leaves or as constants (inference).
class ParamBinder {
 public:
  ParamBinder(Tape& tape, const ParamSet& params, bool trainable = true)
      : tape_(tape), params_(params), trainable_(trainable) {}

  Var operator()(const std::string& name);
  bool has(const std::string& name) const { return params_.count(name) != 0; }
  Tape& tape() { return tape_; }
  const ParamSet& params() const { return params_; }

 private:
  Tape& tape_;
  const ParamSet& params_;
  bool trainable_;
  std::map<std::string, Var> constants_;
};

// ---- element-wise ----------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var add_row(Var x, Var row);   // (m x n) + (1 x n)
Var scale(Var s, Var x);       // (1 x 1) * any
Var mul_scalar(Var x, double k);
Var add_scalar(Var x, double k);
Var neg(Var x);
Var square(Var x);
Var reciprocal(Var x);
Var clamp_min(Var x, double lo);  // max(lo, x); zero gradient where x < lo
Var log_floor(Var x, double floor);  // log(max(x, floor))

enum class Activation { sigmoid, tanh, softmax_rows };

Var sigmoid(Var x);
Var tanh(Var x);
Var softmax_rows(Var x);
Var activation(Activation kind, Var x);

// ---- linear algebra and structure -----------------------------------------

Var matmul(Var a, Var b);  // (m x k)(k x n)
Var linear(Var x, Var w);  // x w^T: (m x k)(n x k)^T
Var transpose(Var x);
Var reshape(Var x, Shape dims);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var slice_rows(Var x, std::size_t begin, std::size_t end);
Var gather_rows(Var table, std::span<const int> ids);
Var pick(Var x, std::size_t flat_index);

// ---- reductions ------------------------------------------------------------

inline constexpr double kStdEpsilon = 1e-12;

Var sum(Var x);
Var mean(Var x);
Var sum_rows(Var x);   // (m x n) -> (m x 1)
Var mean_rows(Var x);
Var max_rows(Var x);   // ties route the gradient to the first maximum
Var std_rows(Var x);   // population std, sqrt(var + kStdEpsilon)

// ---- verification ----------------------------------------------------------

using ScalarGraph = std::function<Var(ParamBinder&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

/// Compares tape gradients against central differences over every parameter
/// coordinate: max |analytic - numeric| / max(1, |analytic|).
GradCheckResult grad_check(const ScalarGraph& f, const ParamSet& params, double h = 1e-5);

}  // namespace coral8
