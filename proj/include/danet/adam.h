// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DANET_ADAM_H_
#define DANET_ADAM_H_

#include <cstdint>
#include <map>
#include <string>

#include "danet/embed_net.h"

namespace danet::nn {

struct AdamState {
  std::map<std::string, Matrix> first_moment;
  std::map<std::string, Matrix> second_moment;
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update of every parameter that has a gradient.
// Missing moments are created as zeros; a gradient whose shape differs
// from its parameter, or names no parameter, is an error.
void adam_step(ParamStore& params, const Gradients& grads, AdamState& state);

// Halves the learning rate once `epochs_since_best` reaches `patience`.
// Returns the counter to carry forward (reset to 0 after a halving).
int lr_schedule(AdamState& state, int epochs_since_best, int patience = 3);

}  // namespace danet::nn

#endif  // DANET_ADAM_H_
