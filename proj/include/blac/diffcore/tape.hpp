#pragma once

#include <functional>
#include <span>
#include <vector>

#include "blac/diffcore/types.hpp"

namespace blac::diff {

/// A trainable matrix together with its accumulated gradient.
struct Parameter {
  Parameter() = default;
  explicit Parameter(Matrix v)
      : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }

  Matrix value;
  Matrix grad;
};

class Tape;

/// Handle to one recorded node. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape over dense matrix values.
///
/// Every node stores a forward closure, so `replay()` recomputes the whole
/// graph from the current parameter values. Gradients flow only into nodes
/// that depend on a parameter or on a variable created with `input()`.
class Tape {
 public:
  using ForwardFn = std::function<Matrix(const Tape&)>;
  /// Receives the gradient of the node's output and pushes contributions
  /// to its parents with `accumulate`.
  using BackwardFn = std::function<void(Tape&, const Matrix&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value);
  /// Leaf that receives a gradient but is not bound to a Parameter.
  Var input(Matrix value);
  /// Leaf bound to `p`; `backward` adds into `p.grad`.
  Var parameter(Parameter& p);

  /// Seeds d(output)/d(output) = 1 and propagates. `output` must be 1x1.
  void backward(Var output);

  /// Gradient of the last `backward` output with respect to `v`. Zero if
  /// `v` was not reached.
  Matrix grad(Var v) const;

  /// Re-evaluates every node in recording order.
  void replay();

  const Matrix& value(int id) const { return nodes_.at(id).value; }
  bool needs_grad(int id) const { return nodes_.at(id).needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Low-level node construction used by the primitive ops.
  Var record(std::vector<Var> parents, ForwardFn forward, BackwardFn backward);

  void accumulate(int id, const Matrix& delta);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    ForwardFn forward;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
};

// Primitive operations. All operands must live on the same tape. Binary
// elementwise ops accept equal shapes, or a 1x1 operand which broadcasts.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator-(Var a);

Var scale(Var a, double k);
Var shift(Var a, double k);

Var square(Var a);
Var relu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
Var clamp(Var a, double lo, double hi);
/// Elementwise minimum. On ties the gradient goes to `a`.
Var minimum(Var a, Var b);

/// W * X + b with b broadcast over columns.
Var affine(Var weight, Var x, Var bias);

/// Column sums, result is 1 x cols.
Var sum_rows(Var a);
/// Sum of all entries, result is 1x1.
Var sum(Var a);
/// Mean of all entries, result is 1x1.
Var mean(Var a);

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var concat_rows(Var top, Var bottom);

/// Applies a per-column map with a known Jacobian. For column j,
/// `fn(j, in_j, out_j, jac_j)` must fill `out_j` (out_rows) and `jac_j`
/// (out_rows x in_rows).
using ColumnFn =
    std::function<void(Eigen::Index, const Vector&, Vector&, Matrix&)>;
Var columnwise(Var a, Eigen::Index out_rows, ColumnFn fn);

/// Result of `value_and_grad`.
struct ValueAndGrad {
  double value = 0.0;
  std::vector<Matrix> gradients;
};

/// Records `f` on a fresh tape, backpropagates from its scalar result and
/// returns the gradient for each entry of `params`, in order. Existing
/// parameter gradients are cleared first.
ValueAndGrad value_and_grad(const std::function<Var(Tape&)>& f,
                            std::span<Parameter* const> params);

}  // namespace blac::diff
