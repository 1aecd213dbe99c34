#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cts/nn/mlp.hpp"

namespace cts::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compares the analytic gradients already stored in `params` against central
/// differences of `loss`. Relative error is |a - n| / max(|a| + |n|, floor).
inline GradCheckResult gradient_check(const std::vector<Param<double>>& params, const std::function<double()>& loss,
                                      double h = 1e-6, double floor = 1e-6) {
  GradCheckResult r;
  for (const auto& p : params) {
    for (Eigen::Index k = 0; k < p.value->size(); ++k) {
      double& w = p.value->data()[k];
      const double saved = w;
      w = saved + h;
      const double up = loss();
      w = saved - h;
      const double down = loss();
      w = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p.grad->data()[k];
      const double err = std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
      r.max_rel_error = std::max(r.max_rel_error, err);
      ++r.checked;
    }
  }
  return r;
}

}  // namespace cts::nn
