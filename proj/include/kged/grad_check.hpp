#pragma once

#include "kged/tensor.hpp"

#include <functional>
#include <vector>

namespace kged {

// Max over coordinates of |analytic - central difference| / max(1, |central difference|).
// `f` maps the point (as a parameter tensor) to a scalar tensor. Throws
// UsageError when two evaluations at the same point disagree.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Matrix& point, double epsilon = 1e-5);

// Same measure over every coordinate of every listed parameter; `f` reads the
// parameters' current values.
double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double epsilon = 1e-5);

}  // namespace kged
