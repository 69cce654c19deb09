#include <gtest/gtest.h>

#include <sstream>

#include "blac/diffcore/adam.hpp"
#include "blac/diffcore/mlp.hpp"
#include "blac/diffcore/serialization.hpp"
#include "blac/diffcore/tape.hpp"
#include "test_util.hpp"

namespace blac {
namespace {

using diff::Activation;
using diff::Mlp;
using diff::Parameter;
using diff::Tape;
using diff::Var;
using testing::max_fd_error;
using testing::random_matrix;

TEST(Mlp, ZeroWeightsReturnBias) {
  Mlp net({3, 2}, Activation::kRelu, Activation::kIdentity);
  net.layer(0).bias.value << 0.5, -1.5;
  Vector x(3);
  x << 4.0, -2.0, 7.0;
  const Vector y = net.apply(x);
  EXPECT_EQ(y[0], 0.5);
  EXPECT_EQ(y[1], -1.5);
}

TEST(Mlp, IdentityLayerReturnsInput) {
  Mlp net({3, 3}, Activation::kIdentity, Activation::kIdentity);
  net.layer(0).weight.value = Matrix::Identity(3, 3);
  Vector x(3);
  x << 1.25, -3.0, 0.5;
  EXPECT_EQ(net.apply(x), x);
}

TEST(Mlp, MatchesStraightLineEvaluation) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Mlp net = Mlp::random({4, 5, 2}, Activation::kTanh, Activation::kIdentity, rng);
    const Matrix x = random_matrix(4, 1, rng);
    const Matrix& w1 = net.layer(0).weight.value;
    const Matrix& b1 = net.layer(0).bias.value;
    const Matrix& w2 = net.layer(1).weight.value;
    const Matrix& b2 = net.layer(1).bias.value;
    double hidden[5];
    for (int i = 0; i < 5; ++i) {
      double s = b1(i, 0);
      for (int j = 0; j < 4; ++j) s += w1(i, j) * x(j, 0);
      hidden[i] = std::tanh(s);
    }
    const Vector y = net.apply(x.col(0));
    for (int i = 0; i < 2; ++i) {
      double s = b2(i, 0);
      for (int j = 0; j < 5; ++j) s += w2(i, j) * hidden[j];
      EXPECT_NEAR(y[i], s, 1e-12);
    }
  }
}

TEST(Mlp, RejectsWrongInputDimension) {
  Mlp net({3, 2}, Activation::kRelu, Activation::kIdentity);
  EXPECT_THROW(net.apply(Vector::Zero(2)), std::invalid_argument);
}

TEST(Mlp, RejectsNonConformableLayers) {
  Mlp net({3, 2}, Activation::kRelu, Activation::kIdentity);
  Mlp::Layer bad;
  bad.weight = Parameter(Matrix::Zero(1, 3));
  bad.bias = Parameter(Matrix::Zero(1, 1));
  EXPECT_THROW(net.append_layer(bad), std::invalid_argument);
}

TEST(Mlp, ApplyIsPure) {
  std::mt19937_64 rng(3);
  Mlp net = Mlp::random({3, 8, 8, 2}, Activation::kRelu, Activation::kIdentity, rng);
  const Vector x = random_matrix(3, 1, rng).col(0);
  const Vector first = net.apply(x);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(net.apply(x), first);
}

TEST(Mlp, RectifierOutputIsNonnegative) {
  std::mt19937_64 rng(11);
  Mlp net = Mlp::random({4, 16, 16, 1}, Activation::kRelu, Activation::kRelu, rng);
  const Matrix xs = random_matrix(4, 10000, rng, 5.0);
  EXPECT_GE(net.apply_batch(xs).minCoeff(), 0.0);
}

TEST(Mlp, BatchMatchesSingle) {
  std::mt19937_64 rng(5);
  Mlp net = Mlp::random({3, 6, 2}, Activation::kRelu, Activation::kIdentity, rng);
  const Matrix xs = random_matrix(3, 7, rng);
  const Matrix ys = net.apply_batch(xs);
  for (Eigen::Index j = 0; j < xs.cols(); ++j) {
    EXPECT_LT((ys.col(j) - net.apply(xs.col(j))).norm(), 1e-12);
  }
}

TEST(Mlp, InputGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  Mlp net = Mlp::random({3, 10, 10, 1}, Activation::kTanh, Activation::kIdentity, rng);
  const Vector x = random_matrix(3, 1, rng).col(0);
  const Vector g = net.input_gradient(x);
  for (int i = 0; i < 3; ++i) {
    Vector up = x, down = x;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    EXPECT_NEAR(g[i], (net.apply(up)[0] - net.apply(down)[0]) / 2e-6, 1e-7);
  }
}

TEST(Tape, SquareAtThree) {
  Parameter w(Matrix::Constant(1, 1, 3.0));
  Parameter* ps[] = {&w};
  const auto r = diff::value_and_grad([&](Tape& t) { return square(t.parameter(w)); }, ps);
  EXPECT_EQ(r.value, 9.0);
  EXPECT_EQ(r.gradients[0](0, 0), 6.0);
}

TEST(Tape, ConstantHasZeroGradient) {
  Parameter w(Matrix::Constant(2, 2, 1.5));
  Parameter* ps[] = {&w};
  const auto r = diff::value_and_grad(
      [&](Tape& t) {
        t.parameter(w);
        return t.constant(4.0);
      },
      ps);
  EXPECT_EQ(r.value, 4.0);
  EXPECT_TRUE((r.gradients[0].array() == 0.0).all());
}

TEST(Tape, MinimumRoutesTiesToFirstArgument) {
  Parameter a(Matrix::Constant(1, 1, 2.0));
  Parameter b(Matrix::Constant(1, 1, 2.0));
  Parameter* ps[] = {&a, &b};
  const auto r = diff::value_and_grad(
      [&](Tape& t) { return minimum(t.parameter(a), t.parameter(b)); }, ps);
  EXPECT_EQ(r.gradients[0](0, 0), 1.0);
  EXPECT_EQ(r.gradients[1](0, 0), 0.0);
}

TEST(Tape, ShapeMismatchFailsAtConstruction) {
  Tape t;
  Var a = t.constant(Matrix::Zero(2, 3));
  Var b = t.constant(Matrix::Zero(3, 2));
  EXPECT_THROW(add(a, b), std::invalid_argument);
  Tape other;
  Var c = other.constant(Matrix::Zero(2, 3));
  EXPECT_THROW(add(a, c), std::invalid_argument);
  EXPECT_THROW(t.backward(a), std::invalid_argument);
}

// Scalar loss built from every primitive in the supported set: affine maps,
// rectifier, tanh, log, square, min of two branches and a batch mean.
struct Composite {
  Mlp a;
  Mlp b;
  Matrix x;

  Var record(Tape& t) {
    Var in = t.constant(x);
    Var pa = a.apply(t, in);
    Var pb = b.apply(t, in);
    Var m = minimum(pa, pb);
    Var l = log(shift(square(pa), 1.0));
    return mean(m + scale(l, 0.3) + tanh(pb));
  }
  double eval() {
    Tape t;
    return record(t).scalar();
  }
  bool near_kink() const {
    // Distance of every pre-activation and of the min branches from a tie.
    auto check = [&](const Mlp& net) {
      Matrix h = x;
      for (std::size_t k = 0; k < net.num_layers(); ++k) {
        const auto& l = net.layer(k);
        Matrix z = l.weight.value * h;
        z.colwise() += l.bias.value.col(0);
        if (l.activation == Activation::kRelu && z.cwiseAbs().minCoeff() < 1e-4) return true;
        h = diff::activate(l.activation, z);
      }
      return false;
    };
    if (check(a) || check(b)) return true;
    return (a.apply_batch(x) - b.apply_batch(x)).cwiseAbs().minCoeff() < 1e-4;
  }
};

TEST(Tape, GradientsMatchFiniteDifferencesOnRandomNets) {
  std::mt19937_64 rng(2024);
  int tested = 0;
  for (int trial = 0; tested < 120 && trial < 1000; ++trial) {
    Composite c{Mlp::random({3, 6, 6, 1}, Activation::kRelu, Activation::kIdentity, rng),
                Mlp::random({3, 5, 1}, Activation::kTanh, Activation::kIdentity, rng),
                random_matrix(3, 4, rng)};
    if (c.near_kink()) continue;
    auto params = c.a.parameters();
    auto pb = c.b.parameters();
    params.insert(params.end(), pb.begin(), pb.end());
    const auto r = diff::value_and_grad([&](Tape& t) { return c.record(t); }, params);
    EXPECT_LE(max_fd_error(params, r.gradients, [&] { return c.eval(); }), 1e-4)
        << "trial " << trial;
    ++tested;
  }
  EXPECT_GE(tested, 100);
}

TEST(Tape, ReplayReproducesOutputBitForBit) {
  std::mt19937_64 rng(4);
  Composite c{Mlp::random({3, 6, 1}, Activation::kRelu, Activation::kIdentity, rng),
              Mlp::random({3, 5, 1}, Activation::kTanh, Activation::kIdentity, rng),
              random_matrix(3, 4, rng)};
  Tape t;
  Var out = c.record(t);
  const double first = out.scalar();
  t.replay();
  EXPECT_EQ(out.scalar(), first);
  // Replay also follows parameter changes.
  c.a.layer(0).bias.value.array() += 0.1;
  t.replay();
  EXPECT_EQ(out.scalar(), c.eval());
}

TEST(Tape, GradientIsLinear) {
  std::mt19937_64 rng(9);
  Mlp net = Mlp::random({2, 4, 1}, Activation::kTanh, Activation::kIdentity, rng);
  const Matrix x = random_matrix(2, 3, rng);
  auto params = net.parameters();
  auto f = [&](Tape& t) { return mean(square(net.apply(t, t.constant(x)))); };
  auto g = [&](Tape& t) { return sum(net.apply(t, t.constant(x))); };
  const auto rf = diff::value_and_grad(f, params);
  const auto rg = diff::value_and_grad(g, params);
  const auto rs = diff::value_and_grad([&](Tape& t) { return f(t) + g(t); }, params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_LT((rs.gradients[i] - rf.gradients[i] - rg.gradients[i]).norm(), 1e-12);
  }
}

TEST(Tape, ColumnwiseUsesSuppliedJacobian) {
  Parameter p(Matrix((Matrix(2, 2) << 0.3, -0.7, 1.1, 0.4).finished()));
  Parameter* ps[] = {&p};
  auto f = [&](Tape& t) {
    Var y = columnwise(t.parameter(p), 1, [](Eigen::Index, const Vector& in, Vector& out, Matrix& jac) {
      out.resize(1);
      out[0] = in[0] * in[0] * in[1];
      jac.resize(1, 2);
      jac << 2.0 * in[0] * in[1], in[0] * in[0];
    });
    return sum(y);
  };
  const auto r = diff::value_and_grad(f, ps);
  auto loss = [&] {
    Tape t;
    return f(t).scalar();
  };
  EXPECT_LE(max_fd_error({&p}, r.gradients, loss), 1e-7);
}

TEST(Tape, ElementwiseOpsMatchFiniteDifferences) {
  std::mt19937_64 rng(12);
  Parameter p(random_matrix(3, 2, rng));
  Parameter q(random_matrix(3, 2, rng));
  Parameter* ps[] = {&p, &q};
  auto f = [&](Tape& t) {
    Var a = t.parameter(p);
    Var b = t.parameter(q);
    Var e = exp(scale(a, 0.5)) * b - softplus(b) + clamp(a, -5.0, 5.0);
    Var s = concat_rows(slice_rows(e, 0, 1), sum_rows(e));
    return mean(s) + sum(-a);
  };
  const auto r = diff::value_and_grad(f, ps);
  auto loss = [&] {
    Tape t;
    return f(t).scalar();
  };
  EXPECT_LE(max_fd_error({&p, &q}, r.gradients, loss), 1e-6);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter w(Matrix::Constant(1, 2, 1.0));
  w.grad << 0.5, -2.0;
  diff::Adam opt({0.1, 0.9, 0.999, 1e-8});
  Parameter* ps[] = {&w};
  opt.step(ps);
  // With bias correction the first step is lr * g / (|g| + eps').
  EXPECT_NEAR(w.value(0, 0), 1.0 - 0.1, 1e-6);
  EXPECT_NEAR(w.value(0, 1), 1.0 + 0.1, 1e-6);
}

TEST(Adam, MinimizesQuadratic) {
  Parameter w(Matrix::Constant(1, 1, 5.0));
  diff::Adam opt({0.05, 0.9, 0.999, 1e-8});
  Parameter* ps[] = {&w};
  for (int i = 0; i < 2000; ++i) {
    diff::value_and_grad([&](Tape& t) { return square(shift(t.parameter(w), -2.0)); }, ps);
    opt.step(ps);
  }
  EXPECT_NEAR(w.value(0, 0), 2.0, 1e-3);
}

TEST(Serialization, RoundTripIsExact) {
  std::mt19937_64 rng(1);
  Mlp net = Mlp::random({4, 7, 3, 2}, Activation::kRelu, Activation::kTanh, rng);
  std::stringstream ss;
  diff::write_mlp(ss, net);
  const Mlp back = diff::read_mlp(ss);
  ASSERT_EQ(back.widths(), net.widths());
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    EXPECT_EQ(back.layer(k).weight.value, net.layer(k).weight.value);
    EXPECT_EQ(back.layer(k).bias.value, net.layer(k).bias.value);
    EXPECT_EQ(back.layer(k).activation, net.layer(k).activation);
  }
}

TEST(Serialization, RejectsTruncatedInput) {
  std::stringstream ss("mlp 1\nwidths 2 1\nactivations relu\n0.5");
  EXPECT_THROW(diff::read_mlp(ss), std::runtime_error);
}

}  // namespace
}  // namespace blac
