#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cts/common/error.hpp"
#include "cts/common/rng.hpp"

namespace cts::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

/// A trainable tensor and its accumulated gradient.
template <typename S>
struct Param {
  Mat<S>* value;
  Mat<S>* grad;
};

/// y = W x + b on column-batched inputs.
template <typename S>
struct Linear {
  Mat<S> weight;  // out x in
  Mat<S> bias;    // out x 1
  Mat<S> grad_weight;
  Mat<S> grad_bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out) { resize(in, out); }

  void resize(std::size_t in, std::size_t out) {
    const auto i = static_cast<Eigen::Index>(in), o = static_cast<Eigen::Index>(out);
    weight = Mat<S>::Zero(o, i);
    bias = Mat<S>::Zero(o, 1);
    grad_weight = Mat<S>::Zero(o, i);
    grad_bias = Mat<S>::Zero(o, 1);
  }

  std::size_t in() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out() const { return static_cast<std::size_t>(weight.rows()); }

  /// LeCun-normal weights (the initialization SELU is designed for), zero bias.
  void init(Rng& rng) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, in())));
    for (Eigen::Index k = 0; k < weight.size(); ++k) weight.data()[k] = static_cast<S>(rng.normal(0.0, sd));
    bias.setZero();
  }
};

/// Stack of linear layers. Hidden layers use SELU (if `activate`) followed by
/// inverted dropout in training mode; the last layer follows `activate_output`.
template <typename S>
class Mlp {
 public:
  struct Cache {
    std::vector<Mat<S>> inputs;  // input of each layer
    std::vector<Mat<S>> pre;     // pre-activation of each layer
    std::vector<Mat<S>> masks;   // dropout masks (empty when unused)
  };

  Mlp() = default;
  /// `sizes` lists the input width followed by every layer's width.
  Mlp(const std::vector<std::size_t>& sizes, bool activate, bool activate_output, double dropout)
      : activate_(activate), activate_output_(activate_output), dropout_(dropout) {
    if (sizes.size() < 2) throw InvalidParams("an MLP needs an input and at least one layer");
    if (dropout < 0.0 || dropout >= 1.0) throw InvalidParams("dropout rate must lie in [0, 1)");
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) layers_.emplace_back(sizes[i], sizes[i + 1]);
  }

  void init(Rng& rng) {
    for (auto& l : layers_) l.init(rng);
  }

  std::size_t in() const { return layers_.front().in(); }
  std::size_t out() const { return layers_.back().out(); }
  std::vector<Linear<S>>& layers() { return layers_; }
  const std::vector<Linear<S>>& layers() const { return layers_; }
  double dropout() const { return dropout_; }

  /// Dropout is applied only with `train` set and `rng` given.
  Mat<S> forward(const Mat<S>& x, bool train, Rng* rng, Cache* cache) const {
    if (static_cast<std::size_t>(x.rows()) != in())
      throw DimensionMismatch("MLP input has " + std::to_string(x.rows()) + " rows, expected " + std::to_string(in()));
    if (cache) {
      cache->inputs.assign(layers_.size(), {});
      cache->pre.assign(layers_.size(), {});
      cache->masks.assign(layers_.size(), {});
    }
    Mat<S> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      Mat<S> z = l.weight * h;
      z.colwise() += l.bias.col(0);
      if (cache) {
        cache->inputs[i] = std::move(h);
        cache->pre[i] = z;
      }
      const bool last = i + 1 == layers_.size();
      if (last ? activate_output_ : activate_) selu_inplace(z);
      if (!last && train && rng && dropout_ > 0.0) {
        Mat<S> mask(z.rows(), z.cols());
        const S keep_scale = static_cast<S>(1.0 / (1.0 - dropout_));
        for (Eigen::Index k = 0; k < mask.size(); ++k)
          mask.data()[k] = rng->uniform() < dropout_ ? S(0) : keep_scale;
        z.array() *= mask.array();
        if (cache) cache->masks[i] = std::move(mask);
      }
      h = std::move(z);
    }
    return h;
  }

  /// Accumulates parameter gradients and returns the input gradient.
  Mat<S> backward(const Cache& cache, const Mat<S>& grad_out) {
    Mat<S> g = grad_out;
    for (std::size_t step = layers_.size(); step-- > 0;) {
      auto& l = layers_[step];
      const bool last = step + 1 == layers_.size();
      if (cache.masks[step].size() != 0) g.array() *= cache.masks[step].array();
      if (last ? activate_output_ : activate_) g.array() *= selu_derivative(cache.pre[step]).array();
      l.grad_weight.noalias() += g * cache.inputs[step].transpose();
      l.grad_bias.col(0) += g.rowwise().sum();
      Mat<S> next = l.weight.transpose() * g;
      g = std::move(next);
    }
    return g;
  }

  void zero_grad() {
    for (auto& l : layers_) {
      l.grad_weight.setZero();
      l.grad_bias.setZero();
    }
  }

  void collect(std::vector<Param<S>>& out) {
    for (auto& l : layers_) {
      out.push_back({&l.weight, &l.grad_weight});
      out.push_back({&l.bias, &l.grad_bias});
    }
  }

  template <typename T>
  Mlp<T> cast() const {
    Mlp<T> m;
    m.activate_ = activate_;
    m.activate_output_ = activate_output_;
    m.dropout_ = dropout_;
    for (const auto& l : layers_) {
      Linear<T> c(l.in(), l.out());
      c.weight = l.weight.template cast<T>();
      c.bias = l.bias.template cast<T>();
      m.layers_.push_back(std::move(c));
    }
    return m;
  }

  static void selu_inplace(Mat<S>& z) {
    const S lam = static_cast<S>(kSeluLambda), la = static_cast<S>(kSeluLambda * kSeluAlpha);
    z = z.unaryExpr([lam, la](S v) { return v > S(0) ? lam * v : la * (std::exp(v) - S(1)); });
  }

  static Mat<S> selu_derivative(const Mat<S>& z) {
    const S lam = static_cast<S>(kSeluLambda), la = static_cast<S>(kSeluLambda * kSeluAlpha);
    return z.unaryExpr([lam, la](S v) { return v > S(0) ? lam : la * std::exp(v); });
  }

 private:
  template <typename>
  friend class Mlp;

  std::vector<Linear<S>> layers_;
  bool activate_ = true;
  bool activate_output_ = true;
  double dropout_ = 0.0;
};

}  // namespace cts::nn
