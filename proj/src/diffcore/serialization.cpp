#include "blac/diffcore/serialization.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace blac::diff {

namespace {

void expect_token(std::istream& in, const std::string& token) {
  std::string got;
  if (!(in >> got) || got != token) {
    throw std::runtime_error("read_mlp: expected '" + token + "', got '" + got +
                             "'");
  }
}

double read_value(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw std::runtime_error("read_mlp: truncated values");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) {
    throw std::runtime_error("read_mlp: malformed value '" + tok + "'");
  }
  return v;
}

}  // namespace

void write_mlp(std::ostream& out, const Mlp& net) {
  const auto widths = net.widths();
  out << "mlp " << net.num_layers() << "\nwidths";
  for (int w : widths) out << ' ' << w;
  out << "\nactivations";
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    out << ' ' << to_string(net.layer(k).activation);
  }
  out << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    const Matrix& w = net.layer(k).weight.value;
    const Matrix& b = net.layer(k).bias.value;
    out << "layer " << k << ' ' << w.rows() << ' ' << w.cols() << '\n';
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        out << w(i, j) << (j + 1 == w.cols() ? '\n' : ' ');
      }
    }
    out << "bias";
    for (Eigen::Index i = 0; i < b.rows(); ++i) out << ' ' << b(i, 0);
    out << '\n';
  }
}

Mlp read_mlp(std::istream& in) {
  expect_token(in, "mlp");
  std::size_t layers = 0;
  if (!(in >> layers) || layers == 0) {
    throw std::runtime_error("read_mlp: bad layer count");
  }
  expect_token(in, "widths");
  std::vector<int> widths(layers + 1);
  for (int& w : widths) {
    if (!(in >> w) || w <= 0) throw std::runtime_error("read_mlp: bad width");
  }
  expect_token(in, "activations");
  std::vector<Activation> acts(layers);
  for (Activation& a : acts) {
    std::string name;
    in >> name;
    a = activation_from_string(name);
  }
  Mlp net;
  for (std::size_t k = 0; k < layers; ++k) {
    expect_token(in, "layer");
    std::size_t idx = 0;
    Eigen::Index rows = 0, cols = 0;
    in >> idx >> rows >> cols;
    if (idx != k || rows != widths[k + 1] || cols != widths[k]) {
      throw std::runtime_error("read_mlp: layer header does not match widths");
    }
    Mlp::Layer layer;
    Matrix w(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = read_value(in);
    }
    expect_token(in, "bias");
    Matrix b(rows, 1);
    for (Eigen::Index i = 0; i < rows; ++i) b(i, 0) = read_value(in);
    layer.weight = Parameter(std::move(w));
    layer.bias = Parameter(std::move(b));
    layer.activation = acts[k];
    net.append_layer(std::move(layer));
  }
  return net;
}

void save_mlp(const std::string& path, const Mlp& net) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mlp: cannot open " + path);
  write_mlp(out, net);
  if (!out) throw std::runtime_error("save_mlp: write failed for " + path);
}

Mlp load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mlp: cannot open " + path);
  return read_mlp(in);
}

}  // namespace blac::diff
