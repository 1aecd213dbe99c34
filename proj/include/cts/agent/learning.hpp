#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "cts/common/rng.hpp"
#include "cts/sim/simulator.hpp"

namespace cts::agent {

/// With `training`, a uniformly random index with probability epsilon;
/// otherwise the first maximum.
std::size_t select_action(std::span<const double> q, double epsilon, Rng& rng, bool training);

/// Linear decay from `start` at turn 0 to `end` at fraction * max_turns,
/// constant afterwards.
double epsilon_at(long turn, long max_turns, double start, double end, double fraction);

enum class DoubleQ { Target, OnlineArgmax };

struct MunchausenParams {
  double gamma = 0.99;
  double tau = 0.03;
  double alpha = 0.9;
  double log_clip = -1.0;
  double q_clip = 10.0;
  DoubleQ double_q = DoubleQ::Target;
};

/// Munchausen soft target of one transition. With pi = softmax(Q_target/tau):
/// r + alpha*tau*max(ln pi(a|s), log_clip)
///   + gamma*(1-done)*sum_a' pi(a'|s')(Q_target(s',a') - tau ln pi(a'|s')).
/// Target Q values are clipped to +-q_clip first. With OnlineArgmax the
/// next-state policy comes from `q_online_next` instead.
double munchausen_target(std::span<const double> q_target, std::size_t action, double reward, bool done,
                         std::span<const double> q_target_next, std::span<const double> q_online_next,
                         const MunchausenParams& params);

/// Binary tree of priority sums over a fixed number of slots.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity);

  void set(std::size_t slot, double priority);
  double get(std::size_t slot) const { return tree_[leaves_ + slot]; }
  double total() const { return tree_[1]; }
  std::size_t capacity() const { return capacity_; }
  /// Slot whose cumulative interval contains `mass` in [0, total()).
  std::size_t find(double mass) const;

 private:
  std::size_t capacity_;
  std::size_t leaves_;
  std::vector<double> tree_;
};

/// Flattened state features plus what is needed to rebuild the candidates.
struct StoredState {
  std::vector<float> features;
  std::size_t node = 0;
  sim::DialogMode mode = sim::DialogMode::Guided;
};

struct Transition {
  std::shared_ptr<const StoredState> state;
  std::shared_ptr<const StoredState> next;
  std::size_t action = 0;
  float reward = 0.0f;
  bool done = false;
};

struct ReplaySample {
  std::vector<std::size_t> slots;
  std::vector<double> weights;
};

/// FIFO ring buffer with proportional prioritized sampling:
/// P(i) ~ max(|delta_i|, 1)^alpha, weights (N P(i))^-beta / max weight.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, double alpha);

  /// New transitions get the largest priority seen so far.
  void push(Transition transition);
  /// Throws BufferTooSmall if fewer than `batch` transitions are stored.
  ReplaySample sample(std::size_t batch, double beta, Rng& rng) const;
  void update(const std::vector<std::size_t>& slots, const std::vector<double>& td_errors);
  /// Sets raw priorities directly (tests).
  void set_priority(std::size_t slot, double priority);

  const Transition& at(std::size_t slot) const { return items_[slot]; }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  double alpha() const { return alpha_; }
  double priority(std::size_t slot) const { return tree_.get(slot); }

 private:
  std::size_t capacity_;
  double alpha_;
  std::vector<Transition> items_;
  std::size_t next_ = 0;
  SumTree tree_;
  double max_priority_ = 1.0;
};

}  // namespace cts::agent
