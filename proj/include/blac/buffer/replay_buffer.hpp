#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "blac/diffcore/types.hpp"

namespace blac::buffer {

struct Transition {
  Vector state;
  Vector control;
  double reward = 0.0;
  double cost = 0.0;
  Vector next_state;
};

/// Column-stacked minibatch: column j of each matrix belongs to sample j.
struct Batch {
  Matrix states;
  Matrix controls;
  RowVector rewards;
  RowVector costs;
  Matrix next_states;

  Eigen::Index size() const { return states.cols(); }
};

/// Raised by `sample` when fewer transitions are stored than requested.
class NotWarmedUp : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed-capacity FIFO of transitions with uniform sampling.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int state_dim, int control_dim,
               std::uint64_t seed);

  /// Throws std::invalid_argument on a dimension mismatch, non-finite
  /// entries or a negative cost.
  void push(Transition t);

  /// Uniform draw with replacement.
  std::vector<Transition> sample(std::size_t count);
  Batch sample_batch(std::size_t count);

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }
  /// i-th oldest stored transition.
  const Transition& at(std::size_t i) const;

  void reseed(std::uint64_t seed) { rng_.seed(seed); }

 private:
  std::vector<std::size_t> draw(std::size_t count);

  std::size_t capacity_;
  int state_dim_;
  int control_dim_;
  std::vector<Transition> data_;
  std::size_t cursor_ = 0;  // next slot to overwrite once full
  std::mt19937_64 rng_;
};

}  // namespace blac::buffer
