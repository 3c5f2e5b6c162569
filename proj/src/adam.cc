// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/adam.h"

#include <cmath>
#include <stdexcept>

namespace danet::nn {

void adam_step(ParamStore& params, const Gradients& grads, AdamState& state) {
  if (!(state.lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  for (const auto& [name, g] : grads) {
    auto it = params.arrays.find(name);
    if (it == params.arrays.end())
      throw std::invalid_argument("gradient for unknown parameter '" + name +
                                  "'");
    if (g.rows() != it->second.rows() || g.cols() != it->second.cols())
      throw std::invalid_argument("gradient shape mismatch for '" + name +
                                  "'");
    for (const auto* moments : {&state.first_moment, &state.second_moment}) {
      auto m = moments->find(name);
      if (m != moments->end() && m->second.size() != 0 &&
          (m->second.rows() != g.rows() || m->second.cols() != g.cols()))
        throw std::invalid_argument("moment shape mismatch for '" + name +
                                    "'");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& [name, g] : grads) {
    Matrix& p = params.arrays.at(name);
    Matrix& m = state.first_moment[name];
    Matrix& v = state.second_moment[name];
    if (m.size() == 0) m = Matrix::Zero(p.rows(), p.cols());
    if (v.size() == 0) v = Matrix::Zero(p.rows(), p.cols());
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
    p.array() -= state.lr * (m.array() / c1) /
                 ((v.array() / c2).sqrt() + state.eps);
  }
}

int lr_schedule(AdamState& state, int epochs_since_best, int patience) {
  if (epochs_since_best >= patience) {
    state.lr *= 0.5;
    return 0;
  }
  return epochs_since_best;
}

}  // namespace danet::nn
