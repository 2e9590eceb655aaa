// SPDX-License-Identifier: Apache-2.0

#include "coral8/optim.hpp"

#include <cmath>

namespace coral8 {

void adam_step(ParamSet& params, const Gradients& grads, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");
  for (const auto& [name, g] : grads) {
    auto p = params.find(name);
    if (p == params.end()) throw std::out_of_range("adam_step: gradient for unknown parameter " + name);
    if (p->second.dims() != g.dims())
      throw ShapeError("adam_step: " + name + " shape mismatch " + to_string(p->second.dims()) +
                       " vs " + to_string(g.dims()));
    if (!g.all_finite()) throw NumericError("adam_step: non-finite gradient for " + name);
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& [name, g] : grads) {
    Tensor& w = params.at(name);
    Tensor& m = state.m.try_emplace(name, Tensor(w.dims(), 0.0)).first->second;
    Tensor& v = state.v.try_emplace(name, Tensor(w.dims(), 0.0)).first->second;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double global_norm(const Gradients& grads) {
  double acc = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.values()) acc += v * v;
  return std::sqrt(acc);
}

double clip_global_norm(Gradients& grads, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("clip_global_norm: threshold must be positive");
  const double norm = global_norm(grads);
  if (norm <= threshold) return norm;
  const double k = threshold / norm;
  for (auto& [name, g] : grads)
    for (double& v : g.storage()) v *= k;
  return norm;
}

}  // namespace coral8
