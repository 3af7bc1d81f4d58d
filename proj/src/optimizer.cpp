// SPDX-License-Identifier: Apache-2.0
#include "setrank/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace setrank {

void adamw_step(std::span<Tensor> params, OptimizerState& state) {
  const std::size_t n = params.size();
  if (state.first_moment.empty()) {
    state.first_moment.resize(n);
    state.second_moment.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      state.first_moment[i] = ArrayX::Zero(params[i].size());
      state.second_moment[i] = ArrayX::Zero(params[i].size());
    }
  }
  if (state.first_moment.size() != n || state.second_moment.size() != n) {
    throw std::invalid_argument(
        "adamw_step: state holds a different number of parameters");
  }

  state.step_count += 1;
  const Scalar bc1 = 1.0 - std::pow(state.beta1, state.step_count);
  const Scalar bc2 = 1.0 - std::pow(state.beta2, state.step_count);

  for (std::size_t i = 0; i < n; ++i) {
    Tensor& p = params[i];
    if (!p.has_grad()) {
      throw std::invalid_argument("adamw_step: parameter " +
                                  std::to_string(i) + " has no gradient");
    }
    const ArrayX& g = p.grad();
    ArrayX& m = state.first_moment[i];
    ArrayX& v = state.second_moment[i];
    if (m.size() != p.size()) {
      throw std::invalid_argument("adamw_step: moment buffer " +
                                  std::to_string(i) +
                                  " does not match parameter shape");
    }
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.square();
    ArrayX m_hat = m / bc1;
    ArrayX v_hat = v / bc2;
    ArrayX& w = p.values_mut();
    w -= state.learning_rate *
         (m_hat / (v_hat.sqrt() + state.epsilon) + state.weight_decay * w);
  }
}

}  // namespace setrank
