#include "w2a/numerics/layers.h"

#include "w2a/numerics/ops.h"

namespace w2a::layers {

void InitLinear(ParameterRecord& params, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng, bool zero) {
  params.Set(prefix + ".w", zero ? Tensor({in, out}, 0.0) : GlorotInit(in, out, rng));
  params.Set(prefix + ".b", Tensor({out}, 0.0));
}

Var ApplyLinear(Graph& g, const ParameterRecord& params, const std::string& prefix, Var x) {
  return ops::Linear(x, g.Param(params, prefix + ".w"), g.Param(params, prefix + ".b"));
}

void InitLayerNorm(ParameterRecord& params, const std::string& prefix, std::size_t dim) {
  params.Set(prefix + ".gamma", Tensor({dim}, 1.0));
  params.Set(prefix + ".beta", Tensor({dim}, 0.0));
}

Var ApplyLayerNorm(Graph& g, const ParameterRecord& params, const std::string& prefix, Var x) {
  Var y = ops::LayerNormRows(x);
  y = ops::MulRow(y, g.Param(params, prefix + ".gamma"));
  return ops::AddRow(y, g.Param(params, prefix + ".beta"));
}

Var Activate(Var x, Activation act) {
  switch (act) {
    case Activation::kNone: return x;
    case Activation::kGelu: return ops::Gelu(x);
    case Activation::kRelu: return ops::Relu(x);
    case Activation::kTanh: return ops::Tanh(x);
  }
  return x;
}

void InitMlp(ParameterRecord& params, const std::string& prefix, const MlpSpec& spec, Rng& rng,
             bool zero_last) {
  for (std::size_t i = 0; i + 1 < spec.sizes.size(); ++i) {
    const bool last = i + 2 == spec.sizes.size();
    InitLinear(params, prefix + "." + std::to_string(i), spec.sizes[i], spec.sizes[i + 1], rng,
               zero_last && last);
  }
}

Var ApplyMlp(Graph& g, const ParameterRecord& params, const std::string& prefix, const MlpSpec& spec,
             Var x) {
  for (std::size_t i = 0; i + 1 < spec.sizes.size(); ++i) {
    x = ApplyLinear(g, params, prefix + "." + std::to_string(i), x);
    if (i + 2 < spec.sizes.size()) x = Activate(x, spec.hidden_act);
  }
  return x;
}

}  // namespace w2a::layers
