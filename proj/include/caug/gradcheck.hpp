#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "caug/graph.hpp"

namespace caug {

// f() must run a full forward/backward pass over the given parameters and
// return the scalar loss; gradients are read from the parameter slots after
// the first call. Central differences per coordinate, max relative error
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
inline double grad_check(const std::function<double()>& f,
                         const std::vector<Parameter<double>*>& params,
                         double epsilon = 1e-5) {
  for (auto* p : params) p->zero_grad();
  const double base = f();
  if (!std::isfinite(base)) throw std::runtime_error("grad_check: non-finite loss");
  std::vector<Tensor<double>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);

  double max_err = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + epsilon;
      for (auto* q : params) q->zero_grad();
      const double up = f();
      p.value[i] = saved - epsilon;
      for (auto* q : params) q->zero_grad();
      const double down = f();
      p.value[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw std::runtime_error("grad_check: non-finite perturbed loss");
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace caug
