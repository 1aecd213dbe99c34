#pragma once

#include <cmath>
#include <vector>

#include "cts/nn/mlp.hpp"

namespace cts::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

/// Global gradient norm, accumulated in double.
template <typename S>
double global_norm(const std::vector<Param<S>>& params) {
  double sq = 0.0;
  for (const auto& p : params)
    for (Eigen::Index k = 0; k < p.grad->size(); ++k) {
      const double g = static_cast<double>(p.grad->data()[k]);
      sq += g * g;
    }
  return std::sqrt(sq);
}

/// Adam with bias correction and global-norm clipping. Moments are kept in
/// double.
template <typename S>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Clips the gradients of `params` in place, then updates them. Returns the
  /// norm before clipping. Throws NonFiniteGradient.
  double step(const std::vector<Param<S>>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Mat<double>::Zero(p.value->rows(), p.value->cols()));
        v_.push_back(Mat<double>::Zero(p.value->rows(), p.value->cols()));
      }
    }
    if (m_.size() != params.size()) throw DimensionMismatch("parameter list changed between Adam steps");
    const double norm = global_norm(params);
    if (!std::isfinite(norm)) throw NonFiniteGradient("gradient norm is not finite");
    const double scale = config_.clip_norm > 0.0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& value = *params[i].value;
      auto& grad = *params[i].grad;
      if (scale != 1.0) grad *= static_cast<S>(scale);
      auto& m = m_[i];
      auto& v = v_[i];
      for (Eigen::Index k = 0; k < value.size(); ++k) {
        const double g = static_cast<double>(grad.data()[k]);
        double& mk = m.data()[k];
        double& vk = v.data()[k];
        mk = config_.beta1 * mk + (1.0 - config_.beta1) * g;
        vk = config_.beta2 * vk + (1.0 - config_.beta2) * g * g;
        const double update = config_.lr * (mk / c1) / (std::sqrt(vk / c2) + config_.eps);
        value.data()[k] = static_cast<S>(static_cast<double>(value.data()[k]) - update);
      }
    }
    return norm;
  }

  long long steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  std::vector<Mat<double>>& first_moments() { return m_; }
  std::vector<Mat<double>>& second_moments() { return v_; }
  const std::vector<Mat<double>>& first_moments() const { return m_; }
  const std::vector<Mat<double>>& second_moments() const { return v_; }
  void restore(long long steps, std::vector<Mat<double>> m, std::vector<Mat<double>> v) {
    t_ = steps;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  AdamConfig config_;
  long long t_ = 0;
  std::vector<Mat<double>> m_;
  std::vector<Mat<double>> v_;
};

}  // namespace cts::nn
