#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lila/numerics/ops.hpp"
#include "lila/numerics/params.hpp"

namespace lila::num {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamState {
  AdamOptions options;
  std::int64_t step = 0;
  std::vector<Tensor<T>> m;  // first moments, aligned with the ParamSet
  std::vector<Tensor<T>> v;  // second moments

  bool operator==(const AdamState& o) const {
    return step == o.step && m == o.m && v == o.v && options.lr == o.options.lr &&
           options.beta1 == o.options.beta1 && options.beta2 == o.options.beta2 && options.eps == o.options.eps;
  }
};

/// One bias-corrected Adam update. Rejects non-finite gradients before
/// touching any parameter.
template <class T>
void adam_step(ParamSet<T>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state) {
  if (grads.size() != params.size())
    throw std::invalid_argument("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                                std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != params[i].shape())
      throw std::invalid_argument("adam_step: gradient shape " + shape_str(grads[i].shape()) + " for parameter " +
                                  params.name(i) + " " + shape_str(params[i].shape()));
    if (!all_finite(grads[i])) throw std::domain_error("adam_step: non-finite gradient for parameter " + params.name(i));
  }
  if (state.m.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m.emplace_back(params[i].shape());
      state.v.emplace_back(params[i].shape());
    }
  }
  const auto& o = state.options;
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(o.beta1), b2 = static_cast<T>(o.beta2);
  const T lr_t = static_cast<T>(o.lr * std::sqrt(c2) / c1);
  const T eps_t = static_cast<T>(o.eps * std::sqrt(c2));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      p[j] -= lr_t * m[j] / (std::sqrt(v[j]) + eps_t);
    }
  }
}

}  // namespace lila::num
