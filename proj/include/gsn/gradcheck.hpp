#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gsn/params.hpp"
#include "gsn/tensor.hpp"

namespace gsn {

/// Central-difference check of analytic gradients against a scalar function
/// of the registry's parameters.
///
/// `loss_with_grad` must run a full forward+backward, accumulating into the
/// registry's grad slots, and return the loss. `loss_only` must evaluate the
/// same function without touching grads. Returns the max over all parameter
/// elements of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
///
/// Only meaningful in 64-bit mode; the caller is expected to avoid functions
/// with kinks (argmax and friends have no usable gradient here).
template <typename T, typename FGrad, typename FEval>
T finite_diff_check(ParamRegistry<T>& params, FGrad loss_with_grad, FEval loss_only, T step) {
  params.zero_grads();
  (void)loss_with_grad();
  std::vector<Tensor<T>> analytic;
  analytic.reserve(static_cast<std::size_t>(params.count()));
  for (const auto& p : params) analytic.push_back(p.grad);

  T worst = T(0);
  for (int k = 0; k < params.count(); ++k) {
    Param<T>& p = params.at(k);
    for (std::int64_t i = 0; i < p.value.size(); ++i) {
      const T saved = p.value[i];
      p.value[i] = saved + step;
      const T hi = loss_only();
      p.value[i] = saved - step;
      const T lo = loss_only();
      p.value[i] = saved;
      const T numeric = (hi - lo) / (T(2) * step);
      const T a = analytic[static_cast<std::size_t>(k)][i];
      const T rel = std::abs(a - numeric) / std::max(T(1e-8), std::abs(a) + std::abs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace gsn
