#ifndef W2A_NUMERICS_LAYERS_H_
#define W2A_NUMERICS_LAYERS_H_

#include <string>
#include <vector>

#include "w2a/numerics/graph.h"
#include "w2a/numerics/rng.h"

// Small building blocks shared by every network. Parameters live in a
// ParameterRecord under "<prefix>.w" / "<prefix>.b" style names.
namespace w2a::layers {

enum class Activation { kNone, kGelu, kRelu, kTanh };

void InitLinear(ParameterRecord& params, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng, bool zero = false);
Var ApplyLinear(Graph& g, const ParameterRecord& params, const std::string& prefix, Var x);

void InitLayerNorm(ParameterRecord& params, const std::string& prefix, std::size_t dim);
Var ApplyLayerNorm(Graph& g, const ParameterRecord& params, const std::string& prefix, Var x);

Var Activate(Var x, Activation act);

// Fully connected stack "<prefix>.0", "<prefix>.1", ... with `hidden_act`
// between layers and no activation after the last one.
struct MlpSpec {
  std::vector<std::size_t> sizes;  // input, hidden..., output
  Activation hidden_act = Activation::kGelu;
};
void InitMlp(ParameterRecord& params, const std::string& prefix, const MlpSpec& spec, Rng& rng,
             bool zero_last = false);
Var ApplyMlp(Graph& g, const ParameterRecord& params, const std::string& prefix, const MlpSpec& spec,
             Var x);

}  // namespace w2a::layers

#endif  // W2A_NUMERICS_LAYERS_H_
