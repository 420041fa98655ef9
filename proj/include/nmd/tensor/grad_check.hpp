#pragma once

#include <functional>

#include "nmd/tensor/params.hpp"

namespace nmd {

/// Largest relative disagreement between backward() and central differences
/// (f(x+h) - f(x-h)) / 2h over every coordinate of `x`, with denominator
/// max(|analytic|, |numeric|, 1e-8). `f` must return a single-element tensor.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h);

/// Same check with respect to every scalar of a ParamSet; `loss` re-reads the
/// current parameter values on each call.
double grad_check(const std::function<Tensor()>& loss, ParamSet& params, double h);

}  // namespace nmd
