#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "edgemix/autodiff.hpp"

namespace edgemix {

/// Scalar objective recorded on the given tape, reading parameters from a store.
using Objective = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries = 0;
};

/// Compares reverse-mode gradients with central differences
/// (f(p+h) - f(p-h)) / 2h for every entry of every parameter in `store`.
/// Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
/// Leaves parameter values unchanged and gradients zeroed.
inline GradCheckResult grad_check(const Objective& f, ParameterStore& store, double step = 1e-5) {
  if (!(step > 0.0)) throw ConfigError("grad_check: step must be > 0");
  store.zero_grad();
  {
    Tape tape;
    Var loss = f(tape);
    tape.backward(loss);
  }
  auto evaluate = [&] {
    Tape tape(false);
    const double v = f(tape).item();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite objective at probe");
    return v;
  };

  GradCheckResult result;
  for (Parameter& p : store.all()) {
    const Matrix analytic = p.grad;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double up = evaluate();
      p.value[i] = saved - step;
      const double down = evaluate();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i];
      const double err =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++result.entries;
      if (result.worst_parameter.empty() || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = p.name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  store.zero_grad();
  return result;
}

}  // namespace edgemix
