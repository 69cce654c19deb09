#pragma once

#include <random>
#include <string>
#include <vector>

#include "blac/diffcore/tape.hpp"
#include "blac/diffcore/types.hpp"

namespace blac::diff {

enum class Activation { kRelu, kTanh, kIdentity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Fully connected network: affine map followed by a per-layer activation.
class Mlp {
 public:
  struct Layer {
    Parameter weight;  // out x in
    Parameter bias;    // out x 1
    Activation activation = Activation::kIdentity;
  };

  Mlp() = default;
  /// Zero-initialized network. `widths` lists input, hidden and output sizes.
  Mlp(const std::vector<int>& widths, Activation hidden, Activation output);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization for weights and
  /// biases.
  static Mlp random(const std::vector<int>& widths, Activation hidden,
                    Activation output, std::mt19937_64& rng);

  int input_dim() const;
  int output_dim() const;
  std::vector<int> widths() const;
  std::size_t num_layers() const { return layers_.size(); }
  Layer& layer(std::size_t k) { return layers_.at(k); }
  const Layer& layer(std::size_t k) const { return layers_.at(k); }
  void append_layer(Layer layer);

  Vector apply(const Vector& x) const;
  /// Columns of `x` are independent inputs.
  Matrix apply_batch(const Matrix& x) const;
  /// Records the forward pass on `tape` with the weights as parameters.
  Var apply(Tape& tape, Var x);
  /// Same, with the weights as constants: gradients reach `x` only.
  Var apply_frozen(Tape& tape, Var x) const;

  /// Gradient of a scalar-output network with respect to its input.
  Vector input_gradient(const Vector& x) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  void check_input(Eigen::Index rows) const;
  template <typename Bind>
  Var record(Var x, Bind bind) const;

  std::vector<Layer> layers_;
};

Matrix activate(Activation a, const Matrix& z);

}  // namespace blac::diff
