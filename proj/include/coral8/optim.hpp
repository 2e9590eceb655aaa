// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "coral8/autodiff.hpp"

namespace coral8 {

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Parameters with no entry in `grads` are left alone
/// (they did not take part in the step); step advances by one per call.
void adam_step(ParamSet& params, const Gradients& grads, AdamState& state, double lr);

double global_norm(const Gradients& grads);

/// Rescales every gradient by threshold / norm when the global L2 norm
/// exceeds threshold. Returns the norm before clipping.
double clip_global_norm(Gradients& grads, double threshold);

}  // namespace coral8
