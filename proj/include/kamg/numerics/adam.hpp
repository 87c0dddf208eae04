#pragma once

#include <cmath>
#include <cstdint>

#include "kamg/errors.hpp"
#include "kamg/numerics/parameters.hpp"

namespace kamg {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  ParameterSet first_moment;
  ParameterSet second_moment;

  static AdamState for_params(const ParameterSet& params, AdamConfig config = {}) {
    return AdamState{config, 0, params.zeros_like(), params.zeros_like()};
  }
};

/// One bias-corrected Adam update, in place.
inline void adam_step(AdamState& state, ParameterSet& params, const ParameterSet& grads) {
  if (!params.same_layout(grads)) throw DimensionError("adam_step: gradient layout differs from parameters");
  if (!params.same_layout(state.first_moment) || !params.same_layout(state.second_moment)) {
    throw DimensionError("adam_step: optimizer state layout differs from parameters");
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& theta = params.value(p);
    const Matrix& g = grads.value(p);
    Matrix& m = state.first_moment.value(p);
    Matrix& v = state.second_moment.value(p);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      theta[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace kamg
