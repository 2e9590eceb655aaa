// SPDX-License-Identifier: Apache-2.0

#include "coral8/attnreg.hpp"

#include <stdexcept>

namespace coral8 {

namespace {

void require_matrix(const char* op, Var alpha) {
  if (!alpha.valid() || alpha.value().empty()) throw ShapeError(std::string(op) + ": empty attention matrix");
  if (alpha.value().rank() != 2)
    throw ShapeError(std::string(op) + ": attention matrix must be rank 2, got " + to_string(alpha.dims()));
}

template <typename F>
double on_constant(const Tensor& alpha, F f) {
  if (alpha.empty()) throw ShapeError("empty attention matrix");
  Tape tape;
  return f(tape.constant(alpha)).value().item();
}

}  // namespace

void validate(const RegWeights& w) {
  if (w.lambda1 < 0 || w.lambda2 < 0 || w.lambda3 < 0)
    throw std::invalid_argument("regularizer weights must be nonnegative");
  if (!(w.delta > 0)) throw std::invalid_argument("delta must be positive");
}

Var c_xu(Var alpha) {
  require_matrix("c_xu", alpha);
  Var column_mass = sum_rows(transpose(alpha));  // (N x 1)
  return sum(square(add_scalar(neg(column_mass), 1.0)));
}

Var c_sal(Var alpha) {
  require_matrix("c_sal", alpha);
  Var mu = mean_rows(alpha);
  return mean(div(sub(max_rows(alpha), mu), mu));
}

Var c_tdvar(Var alpha) {
  require_matrix("c_tdvar", alpha);
  Var over_time = transpose(alpha);  // (N x C)
  return mean(div(std_rows(over_time), mean_rows(over_time)));
}

Var combine_terms(Var xu, Var sal, Var tdvar, const RegWeights& w) {
  validate(w);
  Var total;
  auto accumulate = [&](Var term) { total = total.valid() ? add(total, term) : term; };
  if (w.lambda1 > 0) accumulate(mul_scalar(xu, w.lambda1));
  if (w.lambda2 > 0) accumulate(mul_scalar(reciprocal(clamp_min(sal, w.delta)), w.lambda2));
  if (w.lambda3 > 0) accumulate(mul_scalar(reciprocal(clamp_min(tdvar, w.delta)), w.lambda3));
  return total;
}

Var c_alpha(Var alpha, const RegWeights& w) {
  validate(w);
  require_matrix("c_alpha", alpha);
  Var total = combine_terms(w.lambda1 > 0 ? c_xu(alpha) : Var{}, w.lambda2 > 0 ? c_sal(alpha) : Var{},
                            w.lambda3 > 0 ? c_tdvar(alpha) : Var{}, w);
  if (!total.valid()) total = alpha.tape().constant(Tensor::scalar(0.0));
  return total;
}

double c_xu(const Tensor& alpha) { return on_constant(alpha, [](Var a) { return c_xu(a); }); }
double c_sal(const Tensor& alpha) { return on_constant(alpha, [](Var a) { return c_sal(a); }); }
double c_tdvar(const Tensor& alpha) { return on_constant(alpha, [](Var a) { return c_tdvar(a); }); }
double c_alpha(const Tensor& alpha, const RegWeights& w) {
  return on_constant(alpha, [&](Var a) { return c_alpha(a, w); });
}

double combine_terms(double xu, double sal, double tdvar, const RegWeights& w) {
  Tape tape;
  auto c = [&](double x) { return tape.constant(Tensor::scalar(x)); };
  const Var total = combine_terms(c(xu), c(sal), c(tdvar), w);
  return total.valid() ? total.value().item() : 0.0;
}

double report_regularizer(const std::vector<Tensor>& alphas, const RegWeights& w) {
  if (alphas.empty()) throw std::invalid_argument("report_regularizer: no non-padding sentences");
  double acc = 0.0;
  for (const auto& a : alphas) acc += c_alpha(a, w);
  return acc / static_cast<double>(alphas.size());
}

}  // namespace coral8
