#include "cts/agent/learning.hpp"

#include <algorithm>
#include <cmath>

#include "cts/common/error.hpp"
#include "cts/nn/loss.hpp"

namespace cts::agent {

std::size_t select_action(std::span<const double> q, double epsilon, Rng& rng, bool training) {
  if (q.empty()) throw InvalidParams("select_action needs at least one value");
  if (training && rng.uniform() < epsilon) return rng.index(q.size());
  return static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
}

double epsilon_at(long turn, long max_turns, double start, double end, double fraction) {
  const double horizon = fraction * static_cast<double>(max_turns);
  if (horizon <= 0.0 || turn >= horizon) return end;
  return start + (end - start) * static_cast<double>(turn) / horizon;
}

namespace {

std::vector<double> clipped(std::span<const double> q, double bound) {
  std::vector<double> out(q.begin(), q.end());
  for (auto& v : out) v = std::clamp(v, -bound, bound);
  return out;
}

}  // namespace

double munchausen_target(std::span<const double> q_target, std::size_t action, double reward, bool done,
                         std::span<const double> q_target_next, std::span<const double> q_online_next,
                         const MunchausenParams& p) {
  if (action >= q_target.size()) throw IndexOutOfRange("munchausen_target: action outside the candidates");
  std::vector<double> log_pi;
  const auto q = clipped(q_target, p.q_clip);
  double target = reward;
  if (p.alpha != 0.0) {
    nn::log_softmax(q, p.tau, log_pi);
    target += p.alpha * p.tau * std::max(log_pi[action], p.log_clip);
  }
  if (done) return target;

  const auto qn = clipped(q_target_next, p.q_clip);
  if (qn.empty()) throw InvalidParams("munchausen_target: next state has no candidates");
  if (p.double_q == DoubleQ::OnlineArgmax) {
    if (q_online_next.size() != qn.size()) throw DimensionMismatch("online and target next-state values differ in size");
    nn::log_softmax(clipped(q_online_next, p.q_clip), p.tau, log_pi);
  } else {
    nn::log_softmax(qn, p.tau, log_pi);
  }
  double soft = 0.0;
  for (std::size_t i = 0; i < qn.size(); ++i) {
    const double pi = std::exp(log_pi[i]);
    if (pi > 0.0) soft += pi * (qn[i] - p.tau * log_pi[i]);
  }
  return target + p.gamma * soft;
}

SumTree::SumTree(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidParams("sum tree needs at least one slot");
  leaves_ = 1;
  while (leaves_ < capacity) leaves_ *= 2;
  tree_.assign(2 * leaves_, 0.0);
}

void SumTree::set(std::size_t slot, double priority) {
  if (slot >= capacity_) throw IndexOutOfRange("sum tree slot out of range");
  std::size_t i = leaves_ + slot;
  tree_[i] = priority;
  for (i /= 2; i >= 1; i /= 2) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
}

std::size_t SumTree::find(double mass) const {
  std::size_t i = 1;
  while (i < leaves_) {
    const double left = tree_[2 * i];
    if (mass < left || tree_[2 * i + 1] <= 0.0) {
      i = 2 * i;
    } else {
      mass -= left;
      i = 2 * i + 1;
    }
  }
  return std::min(i - leaves_, capacity_ - 1);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, double alpha)
    : capacity_(capacity), alpha_(alpha), tree_(std::max<std::size_t>(1, capacity)) {
  if (capacity == 0) throw InvalidParams("replay buffer needs a positive capacity");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition transition) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(transition));
  } else {
    items_[next_] = std::move(transition);
  }
  tree_.set(next_, max_priority_);
  next_ = (next_ + 1) % capacity_;
}

ReplaySample ReplayBuffer::sample(std::size_t batch, double beta, Rng& rng) const {
  if (items_.size() < batch || batch == 0)
    throw BufferTooSmall("replay buffer holds " + std::to_string(items_.size()) + " transitions, batch needs " +
                         std::to_string(batch));
  ReplaySample s;
  const double total = tree_.total();
  const double n = static_cast<double>(items_.size());
  double max_w = 0.0;
  for (std::size_t k = 0; k < batch; ++k) {
    auto slot = tree_.find(rng.uniform() * total);
    if (slot >= items_.size()) slot = items_.size() - 1;
    const double w = std::pow(n * tree_.get(slot) / total, -beta);
    s.slots.push_back(slot);
    s.weights.push_back(w);
    max_w = std::max(max_w, w);
  }
  for (auto& w : s.weights) w /= max_w;
  return s;
}

void ReplayBuffer::update(const std::vector<std::size_t>& slots, const std::vector<double>& td_errors) {
  if (slots.size() != td_errors.size()) throw DimensionMismatch("one TD error per sampled slot");
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const double p = std::pow(std::max(std::abs(td_errors[k]), 1.0), alpha_);
    set_priority(slots[k], p);
  }
}

void ReplayBuffer::set_priority(std::size_t slot, double priority) {
  if (!(priority > 0.0)) throw InvalidParams("priorities must be positive");
  tree_.set(slot, priority);
  max_priority_ = std::max(max_priority_, priority);
}

}  // namespace cts::agent
