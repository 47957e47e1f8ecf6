#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "caug/graph.hpp"

namespace caug {

template <typename T>
struct AdamConfig {
  T lr = T(0.001);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// Adam with bias correction over a fixed parameter set.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamConfig<T> cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.shape);
      v_.emplace_back(p->value.shape);
    }
  }

  long step_count() const { return t_; }

  // One update from the accumulated gradients. Throws without touching any
  // parameter if a gradient is non-finite.
  void step() {
    for (auto* p : params_) {
      if (!p->grad.all_finite())
        throw std::runtime_error("adam: non-finite gradient in " + p->name);
    }
    ++t_;
    const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const T g = p.grad[i];
        m_[k][i] = cfg_.beta1 * m_[k][i] + (T(1) - cfg_.beta1) * g;
        v_[k][i] = cfg_.beta2 * v_[k][i] + (T(1) - cfg_.beta2) * g * g;
        const T mhat = m_[k][i] / bc1;
        const T vhat = v_[k][i] / bc2;
        p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  std::vector<Parameter<T>*> params_;
  AdamConfig<T> cfg_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  long t_ = 0;
};

// Scale gradients so their joint L2 norm is at most max_norm.
template <typename T>
void clip_global_norm(const std::vector<Parameter<T>*>& params, T max_norm) {
  double sq = 0.0;
  for (auto* p : params)
    for (T g : p->grad.data) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm <= static_cast<double>(max_norm) || norm == 0.0) return;
  const T s = static_cast<T>(static_cast<double>(max_norm) / norm);
  for (auto* p : params)
    for (T& g : p->grad.data) g *= s;
}

}  // namespace caug
