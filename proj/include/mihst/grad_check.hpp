#pragma once

#include <functional>
#include <vector>

#include "mihst/tensor.hpp"

namespace mihst {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;  // index into the params list
  std::size_t worst_index = 0;  // flat index inside that tensor
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares reverse-mode gradients of a scalar function against central
// differences (f(p+h) - f(p-h)) / 2h for every coordinate of every tensor in
// `params`. Relative error uses max(|analytic|, |numeric|, 1e-8) as the
// denominator. `f` must rebuild its graph from the current parameter values
// on every call. Throws if f is not finite.
GradCheckResult grad_check(const std::function<Tensor()>& f,
                           std::vector<Tensor> params, double h = 1e-5);

}  // namespace mihst
