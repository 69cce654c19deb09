#include "blac/buffer/replay_buffer.hpp"

#include <string>

namespace blac::buffer {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int control_dim,
                           std::uint64_t seed)
    : capacity_(capacity), state_dim_(state_dim), control_dim_(control_dim), rng_(seed) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
  if (state_dim <= 0 || control_dim <= 0) {
    throw std::invalid_argument("ReplayBuffer: dimensions must be positive");
  }
  data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ ||
      t.control.size() != control_dim_) {
    throw std::invalid_argument("ReplayBuffer::push: transition has wrong dimensions");
  }
  if (!t.state.allFinite() || !t.next_state.allFinite() || !t.control.allFinite() ||
      !std::isfinite(t.reward) || !std::isfinite(t.cost)) {
    throw std::invalid_argument("ReplayBuffer::push: non-finite entry");
  }
  if (t.cost < 0.0) throw std::invalid_argument("ReplayBuffer::push: negative cost");
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[cursor_] = std::move(t);
    cursor_ = (cursor_ + 1) % capacity_;
  }
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= data_.size()) throw std::out_of_range("ReplayBuffer::at");
  return data_[(cursor_ + i) % data_.size()];
}

std::vector<std::size_t> ReplayBuffer::draw(std::size_t count) {
  if (data_.size() < count || data_.empty()) {
    throw NotWarmedUp("replay buffer not warmed up: holds " +
                      std::to_string(data_.size()) + " transitions, batch needs " +
                      std::to_string(count));
  }
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = pick(rng_);
  return idx;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t count) {
  std::vector<Transition> out;
  out.reserve(count);
  for (std::size_t i : draw(count)) out.push_back(data_[i]);
  return out;
}

Batch ReplayBuffer::sample_batch(std::size_t count) {
  const auto idx = draw(count);
  const auto n = static_cast<Eigen::Index>(count);
  Batch b;
  b.states.resize(state_dim_, n);
  b.next_states.resize(state_dim_, n);
  b.controls.resize(control_dim_, n);
  b.rewards.resize(n);
  b.costs.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& t = data_[idx[j]];
    b.states.col(j) = t.state;
    b.next_states.col(j) = t.next_state;
    b.controls.col(j) = t.control;
    b.rewards[j] = t.reward;
    b.costs[j] = t.cost;
  }
  return b;
}

}  // namespace blac::buffer
