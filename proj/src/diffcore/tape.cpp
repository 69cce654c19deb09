#include "blac/diffcore/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace blac::diff {

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw std::logic_error("Var: uninitialized handle");
  return tape_->value(id_);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw std::invalid_argument("Var::scalar: node is " +
                                std::to_string(v.rows()) + "x" +
                                std::to_string(v.cols()));
  }
  return v(0, 0);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(double value) {
  return constant(Matrix::Constant(1, 1, value));
}

Var Tape::input(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.needs_grad = true;
  n.forward = [&p](const Tape&) { return p.value; };
  return push(std::move(n));
}

Var Tape::record(std::vector<Var> parents, ForwardFn forward,
                 BackwardFn backward) {
  Node n;
  for (const Var& p : parents) {
    if (p.tape_ != this) {
      throw std::invalid_argument("Tape: operand recorded on another tape");
    }
    n.needs_grad = n.needs_grad || nodes_[p.id_].needs_grad;
  }
  n.value = forward(*this);
  n.forward = std::move(forward);
  n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::accumulate(int id, const Matrix& delta) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = delta;
  } else {
    n.grad += delta;
  }
}

void Tape::backward(Var output) {
  if (output.tape_ != this) {
    throw std::invalid_argument("Tape::backward: output from another tape");
  }
  if (output.rows() != 1 || output.cols() != 1) {
    throw std::invalid_argument("Tape::backward: output must be 1x1");
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[output.id_].grad = Matrix::Ones(1, 1);
  for (int i = output.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) {
      // The closure may append to this node's parents only, which live at
      // lower indices, so the reference stays valid.
      const Matrix g = n.grad;
      n.backward(*this, g);
    }
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id_);
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::replay() {
  for (Node& n : nodes_) {
    if (n.forward) n.value = n.forward(*this);
  }
}

namespace {

void check_same_tape(const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw std::invalid_argument("diff: operands recorded on different tapes");
  }
}

bool is_scalar(const Matrix& m) { return m.rows() == 1 && m.cols() == 1; }

void check_broadcastable(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return;
  if (is_scalar(a) || is_scalar(b)) return;
  throw std::invalid_argument(std::string("diff::") + op + ": shape mismatch " +
                              std::to_string(a.rows()) + "x" +
                              std::to_string(a.cols()) + " vs " +
                              std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()));
}

// Reduces a gradient to the shape of an operand that may have been broadcast.
Matrix reduce_to(const Matrix& g, const Matrix& operand) {
  if (is_scalar(operand) && !is_scalar(g)) {
    return Matrix::Constant(1, 1, g.sum());
  }
  return g;
}

Matrix broadcast(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return Matrix::Constant(rows, cols, m(0, 0));
}

template <typename Value, typename Deriv>
Var unary(Var a, Value value_fn, Deriv deriv_fn) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.record(
      {a}, [ia, value_fn](const Tape& tp) { return value_fn(tp.value(ia)); },
      [ia, deriv_fn](Tape& tp, const Matrix& g) {
        tp.accumulate(ia, deriv_fn(tp.value(ia), g));
      });
}

}  // namespace

Var add(Var a, Var b) {
  check_same_tape(a, b);
  check_broadcastable(a.value(), b.value(), "add");
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(
      {a, b},
      [ia, ib](const Tape& t) -> Matrix {
        const Matrix& x = t.value(ia);
        const Matrix& y = t.value(ib);
        if (is_scalar(x) && !is_scalar(y)) return (y.array() + x(0, 0)).matrix();
        if (is_scalar(y) && !is_scalar(x)) return (x.array() + y(0, 0)).matrix();
        return x + y;
      },
      [ia, ib](Tape& t, const Matrix& g) {
        if (t.needs_grad(ia)) t.accumulate(ia, reduce_to(g, t.value(ia)));
        if (t.needs_grad(ib)) t.accumulate(ib, reduce_to(g, t.value(ib)));
      });
}

Var sub(Var a, Var b) { return add(a, -b); }

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  check_broadcastable(a.value(), b.value(), "mul");
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(
      {a, b},
      [ia, ib](const Tape& t) -> Matrix {
        const Matrix& x = t.value(ia);
        const Matrix& y = t.value(ib);
        if (is_scalar(x) && !is_scalar(y)) return x(0, 0) * y;
        if (is_scalar(y) && !is_scalar(x)) return y(0, 0) * x;
        return x.cwiseProduct(y);
      },
      [ia, ib](Tape& t, const Matrix& g) {
        const Matrix& x = t.value(ia);
        const Matrix& y = t.value(ib);
        const Eigen::Index r = g.rows(), c = g.cols();
        if (t.needs_grad(ia)) {
          t.accumulate(ia,
                       reduce_to(g.cwiseProduct(broadcast(y, r, c)), x));
        }
        if (t.needs_grad(ib)) {
          t.accumulate(ib,
                       reduce_to(g.cwiseProduct(broadcast(x, r, c)), y));
        }
      });
}

Var operator+(Var a, Var b) { return add(a, b); }
Var operator-(Var a, Var b) { return sub(a, b); }
Var operator*(Var a, Var b) { return mul(a, b); }
Var operator-(Var a) { return scale(a, -1.0); }

Var scale(Var a, double k) {
  return unary(
      a, [k](const Matrix& x) -> Matrix { return k * x; },
      [k](const Matrix&, const Matrix& g) -> Matrix { return k * g; });
}

Var shift(Var a, double k) {
  return unary(
      a, [k](const Matrix& x) -> Matrix { return (x.array() + k).matrix(); },
      [](const Matrix&, const Matrix& g) -> Matrix { return g; });
}

Var square(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().square().matrix(); },
      [](const Matrix& x, const Matrix& g) -> Matrix {
        return (2.0 * x.array() * g.array()).matrix();
      });
}

Var relu(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.cwiseMax(0.0); },
      [](const Matrix& x, const Matrix& g) -> Matrix {
        return (x.array() > 0.0).select(g, 0.0);
      });
}

Var tanh(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().tanh().matrix(); },
      [](const Matrix& x, const Matrix& g) -> Matrix {
        const auto th = x.array().tanh();
        return (g.array() * (1.0 - th.square())).matrix();
      });
}

Var exp(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().exp().matrix(); },
      [](const Matrix& x, const Matrix& g) -> Matrix {
        return (g.array() * x.array().exp()).matrix();
      });
}

Var log(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().log().matrix(); },
      [](const Matrix& x, const Matrix& g) -> Matrix {
        return (g.array() / x.array()).matrix();
      });
}

Var softplus(Var a) {
  // log(1 + e^x) evaluated as max(x, 0) + log1p(e^{-|x|}).
  return unary(
      a,
      [](const Matrix& x) -> Matrix {
        return x.unaryExpr([](double v) {
          return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
        });
      },
      [](const Matrix& x, const Matrix& g) -> Matrix {
        const Matrix sig =
            x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        return g.cwiseProduct(sig);
      });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("diff::clamp: lo > hi");
  return unary(
      a,
      [lo, hi](const Matrix& x) -> Matrix { return x.cwiseMax(lo).cwiseMin(hi); },
      [lo, hi](const Matrix& x, const Matrix& g) -> Matrix {
        return (x.array() >= lo && x.array() <= hi).select(g, 0.0);
      });
}

Var minimum(Var a, Var b) {
  check_same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("diff::minimum: shape mismatch");
  }
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(
      {a, b},
      [ia, ib](const Tape& t) -> Matrix {
        return t.value(ia).cwiseMin(t.value(ib));
      },
      [ia, ib](Tape& t, const Matrix& g) {
        const auto first = (t.value(ia).array() <= t.value(ib).array());
        if (t.needs_grad(ia)) t.accumulate(ia, first.select(g, 0.0));
        if (t.needs_grad(ib)) t.accumulate(ib, first.select(0.0, g));
      });
}

Var affine(Var weight, Var x, Var bias) {
  check_same_tape(weight, x);
  check_same_tape(weight, bias);
  if (weight.cols() != x.rows()) {
    throw std::invalid_argument(
        "diff::affine: weight has " + std::to_string(weight.cols()) +
        " columns but input has " + std::to_string(x.rows()) + " rows");
  }
  if (bias.rows() != weight.rows() || bias.cols() != 1) {
    throw std::invalid_argument("diff::affine: bias shape mismatch");
  }
  const int iw = weight.id(), ix = x.id(), ib = bias.id();
  return weight.tape()->record(
      {weight, x, bias},
      [iw, ix, ib](const Tape& t) -> Matrix {
        Matrix out = t.value(iw) * t.value(ix);
        out.colwise() += t.value(ib).col(0);
        return out;
      },
      [iw, ix, ib](Tape& t, const Matrix& g) {
        if (t.needs_grad(iw)) t.accumulate(iw, g * t.value(ix).transpose());
        if (t.needs_grad(ix)) t.accumulate(ix, t.value(iw).transpose() * g);
        if (t.needs_grad(ib)) t.accumulate(ib, g.rowwise().sum());
      });
}

Var sum_rows(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.colwise().sum(); },
      [](const Matrix& x, const Matrix& g) -> Matrix {
        return g.replicate(x.rows(), 1);
      });
}

Var sum(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return Matrix::Constant(1, 1, x.sum()); },
      [](const Matrix& x, const Matrix& g) -> Matrix {
        return Matrix::Constant(x.rows(), x.cols(), g(0, 0));
      });
}

Var mean(Var a) {
  if (a.value().size() == 0) throw std::invalid_argument("diff::mean: empty");
  return unary(
      a,
      [](const Matrix& x) -> Matrix { return Matrix::Constant(1, 1, x.mean()); },
      [](const Matrix& x, const Matrix& g) -> Matrix {
        return Matrix::Constant(x.rows(), x.cols(),
                                g(0, 0) / static_cast<double>(x.size()));
      });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw std::invalid_argument("diff::slice_rows: range out of bounds");
  }
  return unary(
      a,
      [start, count](const Matrix& x) -> Matrix {
        return x.middleRows(start, count);
      },
      [start, count](const Matrix& x, const Matrix& g) -> Matrix {
        Matrix out = Matrix::Zero(x.rows(), x.cols());
        out.middleRows(start, count) = g;
        return out;
      });
}

Var concat_rows(Var top, Var bottom) {
  check_same_tape(top, bottom);
  if (top.cols() != bottom.cols()) {
    throw std::invalid_argument("diff::concat_rows: column mismatch");
  }
  const int it = top.id(), ib = bottom.id();
  const Eigen::Index rt = top.rows(), rb = bottom.rows();
  return top.tape()->record(
      {top, bottom},
      [it, ib](const Tape& t) -> Matrix {
        const Matrix& x = t.value(it);
        const Matrix& y = t.value(ib);
        Matrix out(x.rows() + y.rows(), x.cols());
        out << x, y;
        return out;
      },
      [it, ib, rt, rb](Tape& t, const Matrix& g) {
        if (t.needs_grad(it)) t.accumulate(it, g.topRows(rt));
        if (t.needs_grad(ib)) t.accumulate(ib, g.bottomRows(rb));
      });
}

Var columnwise(Var a, Eigen::Index out_rows, ColumnFn fn) {
  Tape& t = *a.tape();
  const int ia = a.id();
  // Jacobians from the latest forward pass, shared with the backward closure.
  auto jacobians = std::make_shared<std::vector<Matrix>>();
  return t.record(
      {a},
      [ia, out_rows, fn, jacobians](const Tape& tp) -> Matrix {
        const Matrix& x = tp.value(ia);
        Matrix out(out_rows, x.cols());
        jacobians->assign(x.cols(), Matrix());
        Vector in(x.rows());
        Vector col(out_rows);
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          in = x.col(j);
          Matrix& jac = (*jacobians)[j];
          jac.resize(out_rows, x.rows());
          fn(j, in, col, jac);
          if (col.size() != out_rows || jac.rows() != out_rows ||
              jac.cols() != x.rows()) {
            throw std::invalid_argument("diff::columnwise: callback shape");
          }
          out.col(j) = col;
        }
        return out;
      },
      [ia, jacobians](Tape& tp, const Matrix& g) {
        const Matrix& x = tp.value(ia);
        Matrix dx(x.rows(), x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          dx.col(j) = (*jacobians)[j].transpose() * g.col(j);
        }
        tp.accumulate(ia, dx);
      });
}

ValueAndGrad value_and_grad(const std::function<Var(Tape&)>& f,
                            std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
  Tape tape;
  const Var out = f(tape);
  tape.backward(out);
  ValueAndGrad result;
  result.value = out.scalar();
  result.gradients.reserve(params.size());
  for (const Parameter* p : params) result.gradients.push_back(p->grad);
  return result;
}

}  // namespace blac::diff
