#include "mihst/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace mihst {
namespace {

double eval_value(const std::function<Tensor()>& f) {
  const double v = f().item();
  if (!std::isfinite(v)) throw Error("grad_check: function value is not finite");
  return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& f,
                           std::vector<Tensor> params, double h) {
  if (!(h > 0.0)) throw ConfigError("grad_check: step h must be positive");
  for (auto& p : params) {
    if (!p.requires_grad()) throw Error("grad_check: parameter does not require grad");
    p.zero_grad();
  }

  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = f();
  }
  if (!std::isfinite(loss.item())) throw Error("grad_check: function value is not finite");

  std::vector<std::vector<double>> analytic;
  if (loss.requires_grad()) {
    tape.backward(loss);
    for (const auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());
  } else {
    // f does not depend on any tracked tensor: gradient is identically zero.
    for (const auto& p : params) analytic.emplace_back(p.size(), 0.0);
  }

  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto data = params[pi].data_mut();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double fp = eval_value(f);
      data[i] = orig - h;
      const double fm = eval_value(f);
      data[i] = orig;
      const double num = (fp - fm) / (2.0 * h);
      const double ana = analytic[pi][i];
      const double denom = std::max({std::abs(ana), std::abs(num), 1e-8});
      const double rel = std::abs(ana - num) / denom;
      ++res.coordinates;
      if (res.coordinates == 1 || rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = pi;
        res.worst_index = i;
        res.analytic = ana;
        res.numeric = num;
      }
    }
  }
  return res;
}

}  // namespace mihst
