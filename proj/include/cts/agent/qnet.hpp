#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "cts/nn/checkpoint.hpp"
#include "cts/nn/mlp.hpp"

namespace cts::agent {

using nn::Mat;
using nn::Vec;

/// Layer widths of every part of the network.
struct NetProfile {
  std::vector<std::size_t> trunk{256, 128};
  std::vector<std::size_t> value{64};
  std::vector<std::size_t> advantage{128, 64};
  std::vector<std::size_t> action{64};
  std::vector<std::size_t> mode{16};
  double dropout = 0.25;

  static NetProfile desk() { return {}; }
  static NetProfile paper() {
    return {{8096, 4096, 4096}, {2048, 1024}, {4096, 2048, 1024}, {4096}, {256}, 0.25};
  }
  /// "desk" or "paper"; throws ConfigError.
  static NetProfile named(const std::string& name) {
    if (name == "desk") return desk();
    if (name == "paper") return paper();
    throw ConfigError("unknown network profile '" + name + "'");
  }
};

/// Candidates of a batch of states: the candidates of state b are columns
/// offsets[b] .. offsets[b+1] of `actions`.
template <typename S>
struct QBatch {
  Mat<S> states;   // state_dim x B
  Mat<S> actions;  // action_dim x N
  std::vector<Eigen::Index> offsets;  // B + 1 entries

  Eigen::Index size() const { return states.cols(); }
  Eigen::Index count(Eigen::Index b) const { return offsets[b + 1] - offsets[b]; }
};

template <typename S>
struct QOutput {
  Vec<S> q;          // N
  Vec<S> value;      // B
  Vec<S> advantage;  // N
  Vec<S> mode_logit; // B; > 0 predicts Free
};

/// Per-action dueling Q-network. A shared trunk encodes the state; the value
/// head and the mode head read only the trunk. Each candidate's encoding is
/// concatenated with the trunk output to give one advantage scalar, and
/// Q(s, a_i) = V(s) + A(s, a_i) - mean_j A(s, a_j).
template <typename S>
class CtsQNetwork {
 public:
  struct Cache {
    typename nn::Mlp<S>::Cache trunk, value, action, advantage, mode;
    std::vector<Eigen::Index> offsets;
    Eigen::Index trunk_width = 0;
  };

  CtsQNetwork() = default;
  CtsQNetwork(std::size_t state_dim, std::size_t action_dim, const NetProfile& profile, std::uint64_t seed)
      : state_dim_(state_dim), action_dim_(action_dim), profile_(profile) {
    auto sizes = [](std::size_t in, const std::vector<std::size_t>& hidden, bool scalar) {
      std::vector<std::size_t> s{in};
      s.insert(s.end(), hidden.begin(), hidden.end());
      if (scalar) s.push_back(1);
      return s;
    };
    if (profile.trunk.empty() || profile.action.empty())
      throw InvalidParams("trunk and action encoder need at least one layer");
    const double d = profile.dropout;
    trunk_ = nn::Mlp<S>(sizes(state_dim, profile.trunk, false), true, true, d);
    value_ = nn::Mlp<S>(sizes(trunk_.out(), profile.value, true), true, false, d);
    action_ = nn::Mlp<S>(sizes(action_dim, profile.action, false), true, true, d);
    advantage_ = nn::Mlp<S>(sizes(trunk_.out() + action_.out(), profile.advantage, true), true, false, d);
    mode_ = nn::Mlp<S>(sizes(trunk_.out(), profile.mode, true), false, false, 0.0);
    Rng rng(seed);
    for (auto* m : parts()) m->init(rng);
  }

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  const NetProfile& profile() const { return profile_; }

  QOutput<S> forward(const QBatch<S>& batch, bool train = false, Rng* rng = nullptr, Cache* cache = nullptr) const {
    const auto B = batch.size();
    if (static_cast<Eigen::Index>(batch.offsets.size()) != B + 1 || batch.offsets.front() != 0 ||
        batch.offsets.back() != batch.actions.cols())
      throw DimensionMismatch("candidate offsets do not match the batch");
    for (Eigen::Index b = 0; b < B; ++b)
      if (batch.count(b) < 1) throw DimensionMismatch("every state needs at least one candidate");
    Cache local;
    Cache* c = cache ? cache : &local;
    const bool keep = cache != nullptr;

    const Mat<S> h = trunk_.forward(batch.states, train, rng, keep ? &c->trunk : nullptr);
    const Mat<S> v = value_.forward(h, train, rng, keep ? &c->value : nullptr);
    const Mat<S> m = mode_.forward(h, train, rng, keep ? &c->mode : nullptr);
    const Mat<S> e = action_.forward(batch.actions, train, rng, keep ? &c->action : nullptr);
    const auto N = batch.actions.cols();
    Mat<S> x(h.rows() + e.rows(), N);
    for (Eigen::Index b = 0; b < B; ++b)
      for (auto i = batch.offsets[b]; i < batch.offsets[b + 1]; ++i) x.col(i).head(h.rows()) = h.col(b);
    x.bottomRows(e.rows()) = e;
    const Mat<S> a = advantage_.forward(x, train, rng, keep ? &c->advantage : nullptr);

    QOutput<S> out;
    out.value = v.row(0).transpose();
    out.mode_logit = m.row(0).transpose();
    out.advantage = a.row(0).transpose();
    out.q.resize(N);
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto lo = batch.offsets[b], n = batch.count(b);
      const S mean = out.advantage.segment(lo, n).mean();
      out.q.segment(lo, n) = (out.advantage.segment(lo, n).array() - mean + out.value(b)).matrix();
    }
    if (keep) {
      c->offsets = batch.offsets;
      c->trunk_width = h.rows();
    }
    return out;
  }

  /// Accumulates gradients of a loss with dL/dQ = `dq` and dL/dmode = `dmode`.
  void backward(const Cache& c, const Vec<S>& dq, const Vec<S>& dmode) {
    const auto B = static_cast<Eigen::Index>(c.offsets.size()) - 1;
    const auto N = c.offsets.back();
    if (dq.size() != N || dmode.size() != B) throw DimensionMismatch("gradient shapes do not match the batch");
    Mat<S> da(1, N), dv(1, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto lo = c.offsets[b], n = c.offsets[b + 1] - lo;
      const S sum = dq.segment(lo, n).sum();
      dv(0, b) = sum;
      da.row(0).segment(lo, n) = (dq.segment(lo, n).array() - sum / static_cast<S>(n)).matrix().transpose();
    }
    const Mat<S> dx = advantage_.backward(c.advantage, da);
    action_.backward(c.action, dx.bottomRows(dx.rows() - c.trunk_width));
    Mat<S> dh = value_.backward(c.value, dv);
    dh += mode_.backward(c.mode, dmode.transpose());
    for (Eigen::Index b = 0; b < B; ++b)
      for (auto i = c.offsets[b]; i < c.offsets[b + 1]; ++i) dh.col(b) += dx.col(i).head(c.trunk_width);
    trunk_.backward(c.trunk, dh);
  }

  void zero_grad() {
    for (auto* m : parts()) m->zero_grad();
  }

  std::vector<nn::Param<S>> params() {
    std::vector<nn::Param<S>> out;
    for (auto* m : parts()) m->collect(out);
    return out;
  }

  /// Hard copy of all parameters.
  void copy_from(const CtsQNetwork& other) {
    auto mine = params();
    auto theirs = const_cast<CtsQNetwork&>(other).params();
    if (mine.size() != theirs.size()) throw DimensionMismatch("networks have different shapes");
    for (std::size_t i = 0; i < mine.size(); ++i) *mine[i].value = *theirs[i].value;
  }

  bool same_parameters(const CtsQNetwork& other) const {
    auto mine = const_cast<CtsQNetwork&>(*this).params();
    auto theirs = const_cast<CtsQNetwork&>(other).params();
    if (mine.size() != theirs.size()) return false;
    for (std::size_t i = 0; i < mine.size(); ++i) {
      const auto& a = *mine[i].value;
      const auto& b = *theirs[i].value;
      if (a.rows() != b.rows() || a.cols() != b.cols() ||
          std::memcmp(a.data(), b.data(), sizeof(S) * static_cast<std::size_t>(a.size())) != 0)
        return false;
    }
    return true;
  }

  template <typename T>
  CtsQNetwork<T> cast() const {
    CtsQNetwork<T> n;
    n.state_dim_ = state_dim_;
    n.action_dim_ = action_dim_;
    n.profile_ = profile_;
    n.trunk_ = trunk_.template cast<T>();
    n.value_ = value_.template cast<T>();
    n.action_ = action_.template cast<T>();
    n.advantage_ = advantage_.template cast<T>();
    n.mode_ = mode_.template cast<T>();
    return n;
  }

  /// Parameter tensors in params() order.
  std::vector<Eigen::MatrixXf> tensors() const {
    std::vector<Eigen::MatrixXf> out;
    for (const auto& p : const_cast<CtsQNetwork&>(*this).params()) out.push_back(p.value->template cast<float>());
    return out;
  }

  /// Throws CheckpointError when shapes differ.
  void load_tensors(const std::vector<Eigen::MatrixXf>& tensors) {
    auto ps = params();
    if (ps.size() != tensors.size()) throw CheckpointError("checkpoint has a different number of tensors");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (ps[i].value->rows() != tensors[i].rows() || ps[i].value->cols() != tensors[i].cols())
        throw CheckpointError("checkpoint tensor " + std::to_string(i) + " has a different shape");
      *ps[i].value = tensors[i].template cast<S>();
    }
  }

  nn::Mlp<S>& trunk() { return trunk_; }
  nn::Mlp<S>& value_head() { return value_; }
  nn::Mlp<S>& mode_head() { return mode_; }
  nn::Mlp<S>& advantage_head() { return advantage_; }
  const nn::Mlp<S>& trunk() const { return trunk_; }
  const nn::Mlp<S>& value_head() const { return value_; }
  const nn::Mlp<S>& mode_head() const { return mode_; }

 private:
  template <typename>
  friend class CtsQNetwork;

  std::vector<nn::Mlp<S>*> parts() { return {&trunk_, &value_, &action_, &advantage_, &mode_}; }

  std::size_t state_dim_ = 0;
  std::size_t action_dim_ = 0;
  NetProfile profile_;
  nn::Mlp<S> trunk_, value_, action_, advantage_, mode_;
};

}  // namespace cts::agent
