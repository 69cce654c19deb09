#include "blac/diffcore/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace blac::diff {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kIdentity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

Matrix activate(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::kRelu:
      return z.cwiseMax(0.0);
    case Activation::kTanh:
      return z.array().tanh().matrix();
    case Activation::kIdentity:
      return z;
  }
  return z;
}

Mlp::Mlp(const std::vector<int>& widths, Activation hidden, Activation output) {
  if (widths.size() < 2) {
    throw std::invalid_argument("Mlp: need at least input and output widths");
  }
  for (int w : widths) {
    if (w <= 0) throw std::invalid_argument("Mlp: widths must be positive");
  }
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    Layer layer;
    layer.weight = Parameter(Matrix::Zero(widths[k + 1], widths[k]));
    layer.bias = Parameter(Matrix::Zero(widths[k + 1], 1));
    layer.activation = (k + 2 == widths.size()) ? output : hidden;
    layers_.push_back(std::move(layer));
  }
}

Mlp Mlp::random(const std::vector<int>& widths, Activation hidden,
                Activation output, std::mt19937_64& rng) {
  Mlp net(widths, hidden, output);
  for (Layer& layer : net.layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.value.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < layer.weight.value.size(); ++i) {
      layer.weight.value.data()[i] = dist(rng);
    }
    for (Eigen::Index i = 0; i < layer.bias.value.size(); ++i) {
      layer.bias.value.data()[i] = dist(rng);
    }
  }
  return net;
}

int Mlp::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.value.cols());
}

int Mlp::output_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.value.rows());
}

std::vector<int> Mlp::widths() const {
  std::vector<int> w;
  if (layers_.empty()) return w;
  w.push_back(input_dim());
  for (const Layer& l : layers_) w.push_back(static_cast<int>(l.weight.value.rows()));
  return w;
}

void Mlp::append_layer(Layer layer) {
  if (layer.bias.value.rows() != layer.weight.value.rows() ||
      layer.bias.value.cols() != 1) {
    throw std::invalid_argument("Mlp: bias shape does not match weight rows");
  }
  if (!layers_.empty() &&
      layers_.back().weight.value.rows() != layer.weight.value.cols()) {
    throw std::invalid_argument("Mlp: layer shapes are not conformable");
  }
  layers_.push_back(std::move(layer));
}

void Mlp::check_input(Eigen::Index rows) const {
  if (layers_.empty()) throw std::logic_error("Mlp: network has no layers");
  if (rows != input_dim()) {
    throw std::invalid_argument("Mlp: input has dimension " +
                                std::to_string(rows) + ", expected " +
                                std::to_string(input_dim()));
  }
}

Vector Mlp::apply(const Vector& x) const {
  check_input(x.size());
  Vector h = x;
  for (const Layer& l : layers_) {
    Vector z = l.weight.value * h + l.bias.value.col(0);
    h = activate(l.activation, z);
  }
  return h;
}

Matrix Mlp::apply_batch(const Matrix& x) const {
  check_input(x.rows());
  Matrix h = x;
  for (const Layer& l : layers_) {
    Matrix z = l.weight.value * h;
    z.colwise() += l.bias.value.col(0);
    h = activate(l.activation, z);
  }
  return h;
}

template <typename Bind>
Var Mlp::record(Var x, Bind bind) const {
  check_input(x.rows());
  Var h = x;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto [w, b] = bind(k);
    h = affine(w, h, b);
    switch (layers_[k].activation) {
      case Activation::kRelu:
        h = relu(h);
        break;
      case Activation::kTanh:
        h = tanh(h);
        break;
      case Activation::kIdentity:
        break;
    }
  }
  return h;
}

Var Mlp::apply(Tape& tape, Var x) {
  return record(x, [&](std::size_t k) {
    return std::pair{tape.parameter(layers_[k].weight),
                     tape.parameter(layers_[k].bias)};
  });
}

Var Mlp::apply_frozen(Tape& tape, Var x) const {
  return record(x, [&](std::size_t k) {
    return std::pair{tape.constant(layers_[k].weight.value),
                     tape.constant(layers_[k].bias.value)};
  });
}

Vector Mlp::input_gradient(const Vector& x) const {
  check_input(x.size());
  if (output_dim() != 1) {
    throw std::invalid_argument("Mlp::input_gradient: output must be scalar");
  }
  std::vector<Vector> pre;
  pre.reserve(layers_.size());
  Vector h = x;
  for (const Layer& l : layers_) {
    pre.push_back(l.weight.value * h + l.bias.value.col(0));
    h = activate(l.activation, pre.back());
  }
  Vector g = Vector::Ones(1);
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Layer& l = layers_[k];
    const Vector& z = pre[k];
    switch (l.activation) {
      case Activation::kRelu:
        g = (z.array() > 0.0).select(g, 0.0);
        break;
      case Activation::kTanh:
        g = (g.array() * (1.0 - z.array().tanh().square())).matrix();
        break;
      case Activation::kIdentity:
        break;
    }
    g = l.weight.value.transpose() * g;
  }
  return g;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (Layer& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
  std::vector<const Parameter*> out;
  for (const Layer& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) {
    n += l.weight.value.size() + l.bias.value.size();
  }
  return n;
}

void Mlp::zero_grad() {
  for (Layer& l : layers_) {
    l.weight.zero_grad();
    l.bias.zero_grad();
  }
}

}  // namespace blac::diff
