// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "setrank/tensor.hpp"

namespace setrank {

/// AdamW with decoupled weight decay. Moment buffers are kept per parameter,
/// in the order the parameters were registered.
struct OptimizerState {
  Scalar learning_rate = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar epsilon = 1e-8;
  Scalar weight_decay = 0.01;
  long step_count = 0;
  std::vector<ArrayX> first_moment;
  std::vector<ArrayX> second_moment;
};

/// One AdamW update over `params`, reading each parameter's accumulated
/// gradient. Lazily allocates moment buffers on the first call. Throws
/// std::invalid_argument if any parameter has no gradient or if the state
/// was built for a different parameter list.
void adamw_step(std::span<Tensor> params, OptimizerState& state);

}  // namespace setrank
