#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace cts::nn {

/// Huber loss with threshold `delta`, and its derivative w.r.t. `pred`.
inline double huber(double pred, double target, double delta = 1.0) {
  const double d = std::abs(pred - target);
  return d <= delta ? 0.5 * d * d : delta * (d - 0.5 * delta);
}

inline double huber_grad(double pred, double target, double delta = 1.0) {
  const double d = pred - target;
  return std::clamp(d, -delta, delta);
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Binary cross-entropy on a logit; stable for large |logit|.
inline double bce_with_logits(double logit, double label) {
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

inline double bce_with_logits_grad(double logit, double label) { return sigmoid(logit) - label; }

/// Softmax of `x / temperature` and its log, computed stably.
inline void log_softmax(const std::vector<double>& x, double temperature, std::vector<double>& log_p) {
  log_p.resize(x.size());
  double m = -INFINITY;
  for (double v : x) m = std::max(m, v / temperature);
  double sum = 0.0;
  for (double v : x) sum += std::exp(v / temperature - m);
  const double log_z = m + std::log(sum);
  for (std::size_t i = 0; i < x.size(); ++i) log_p[i] = x[i] / temperature - log_z;
}

}  // namespace cts::nn
