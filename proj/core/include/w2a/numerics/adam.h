#ifndef W2A_NUMERICS_ADAM_H_
#define W2A_NUMERICS_ADAM_H_

#include <cstdint>

#include "w2a/numerics/parameters.h"

namespace w2a {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  ParameterRecord first_moment;
  ParameterRecord second_moment;
};

AdamState MakeAdam(double lr);

// Bias-corrected Adam update, applied in lexicographic name order. Every
// parameter needs a gradient of the same shape (ContractError otherwise);
// extra gradients are ignored.
void AdamStep(ParameterRecord& params, const ParameterRecord& grads, AdamState& state);

}  // namespace w2a

#endif  // W2A_NUMERICS_ADAM_H_
