#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gsn/errors.hpp"
#include "gsn/params.hpp"
#include "gsn/tensor.hpp"

namespace gsn {

template <typename T>
struct AdamConfig {
  T lr = T(1e-4);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

/// Bias-corrected Adam over a parameter registry. Moment tensors are kept in
/// registry order; step() consumes the grads currently stored on the params.
template <typename T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig<T> cfg) : cfg_(cfg) {}
  Adam(AdamConfig<T> cfg, const ParamRegistry<T>& params) : cfg_(cfg) { reset(params); }

  void reset(const ParamRegistry<T>& params) {
    step_ = 0;
    m_.clear();
    v_.clear();
    for (const auto& p : params) {
      m_.emplace_back(p.value.shape());
      v_.emplace_back(p.value.shape());
    }
  }

  AdamConfig<T>& config() { return cfg_; }
  const AdamConfig<T>& config() const { return cfg_; }
  std::int64_t step_count() const { return step_; }

  void step(ParamRegistry<T>& params) {
    if (static_cast<int>(m_.size()) != params.count())
      throw ShapeError("adam: optimizer state does not match parameter registry");
    ++step_;
    const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(step_));
    const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(step_));
    for (int k = 0; k < params.count(); ++k) {
      Param<T>& p = params.at(k);
      Tensor<T>& m = m_[static_cast<std::size_t>(k)];
      Tensor<T>& v = v_[static_cast<std::size_t>(k)];
      if (!m.same_shape(p.value)) throw ShapeError("adam: moment shape mismatch for " + p.name);
      for (std::int64_t i = 0; i < p.value.size(); ++i) {
        const T g = p.grad[i];
        m[i] = cfg_.beta1 * m[i] + (T(1) - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (T(1) - cfg_.beta2) * g * g;
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  // Checkpoint access.
  std::vector<Tensor<T>>& moments1() { return m_; }
  std::vector<Tensor<T>>& moments2() { return v_; }
  void set_step_count(std::int64_t s) { step_ = s; }

 private:
  AdamConfig<T> cfg_;
  std::int64_t step_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace gsn
