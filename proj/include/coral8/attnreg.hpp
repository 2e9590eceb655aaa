// SPDX-License-Identifier: Apache-2.0
//
// Regularizers over an inter-image attention matrix alpha (C x N): rows are
// word steps, columns are images.
//
//   c_xu    = sum_i (1 - sum_t alpha_ti)^2
//   c_sal   = mean_t (max_i alpha_ti - mean_i alpha_ti) / mean_i alpha_ti
//   c_tdvar = mean_i std_t(alpha_ti) / mean_t(alpha_ti)
//   c_alpha = l1 c_xu + l2 / max(delta, c_sal) + l3 / max(delta, c_tdvar)
//
// A term whose weight is zero is left out of the graph entirely.

#pragma once

#include <vector>

#include "coral8/autodiff.hpp"

namespace coral8 {

struct RegWeights {
  double lambda1 = 1.0;
  double lambda2 = 0.5;
  double lambda3 = 0.5;
  double delta = 0.001;
};

void validate(const RegWeights& w);

Var c_xu(Var alpha);
Var c_sal(Var alpha);
Var c_tdvar(Var alpha);
Var c_alpha(Var alpha, const RegWeights& w);

/// The weighted sum from already evaluated terms; skipped terms may be invalid.
Var combine_terms(Var xu, Var sal, Var tdvar, const RegWeights& w);
double combine_terms(double xu, double sal, double tdvar, const RegWeights& w);

double c_xu(const Tensor& alpha);
double c_sal(const Tensor& alpha);
double c_tdvar(const Tensor& alpha);
double c_alpha(const Tensor& alpha, const RegWeights& w);

/// Mean of c_alpha over the given (non-padding) sentences.
double report_regularizer(const std::vector<Tensor>& alphas, const RegWeights& w);

}  // namespace coral8
