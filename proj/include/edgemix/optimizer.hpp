#pragma once

#include <cmath>

#include "edgemix/error.hpp"
#include "edgemix/parameters.hpp"

namespace edgemix {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One adaptive-moment update from the accumulated gradients, then zeroes them.
///
/// A tensor whose gradient is identically zero for this step is left alone,
/// moments included, so a step only moves parameters its loss actually
/// reached. Bias correction uses each tensor's own update count.
inline void optimizer_step(ParameterStore& store, double learning_rate,
                           const AdamOptions& opt = {}) {
  if (!(learning_rate > 0.0)) throw ConfigError("optimizer_step: learning rate must be > 0");
  for (const Parameter& p : store.all())
    if (!p.grad.all_finite())
      throw NumericError("optimizer_step: non-finite gradient in parameter " + p.name);

  for (Parameter& p : store.all()) {
    bool touched = false;
    for (double g : p.grad.values())
      if (g != 0.0) {
        touched = true;
        break;
      }
    if (!touched) continue;
    ++p.updates;
    const double t = static_cast<double>(p.updates);
    const double c1 = 1.0 - std::pow(opt.beta1, t);
    const double c2 = 1.0 - std::pow(opt.beta2, t);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      double& m = p.first_moment[i];
      double& v = p.second_moment[i];
      m = opt.beta1 * m + (1.0 - opt.beta1) * g;
      v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
      p.value[i] -= learning_rate * (m / c1) / (std::sqrt(v / c2) + opt.epsilon);
    }
  }
  store.count_step();
  store.zero_grad();
}

}  // namespace edgemix
