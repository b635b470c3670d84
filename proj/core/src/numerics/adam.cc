#include "w2a/numerics/adam.h"

#include <cmath>

#include "w2a/numerics/errors.h"

namespace w2a {

AdamState MakeAdam(double lr) {
  AdamState state;
  state.lr = lr;
  return state;
}

void AdamStep(ParameterRecord& params, const ParameterRecord& grads, AdamState& state) {
  for (const auto& [name, value] : params.entries()) {
    if (!grads.Contains(name)) throw ContractError("missing gradient for parameter '" + name + "'");
    if (grads.Get(name).shape() != value.shape()) {
      throw ContractError("gradient shape " + ShapeToString(grads.Get(name).shape()) +
                          " does not match parameter '" + name + "' " + ShapeToString(value.shape()));
    }
    if (!state.first_moment.Contains(name)) {
      state.first_moment.Set(name, Tensor(value.shape(), 0.0));
      state.second_moment.Set(name, Tensor(value.shape(), 0.0));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& [name, unused] : params.entries()) {
    Tensor& p = params.GetMutable(name);
    const Tensor& g = grads.Get(name);
    Tensor& m = state.first_moment.GetMutable(name);
    Tensor& v = state.second_moment.GetMutable(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace w2a
