#include "w2a/policy/residual.h"

#include <algorithm>

#include "w2a/numerics/adam.h"
#include "w2a/numerics/errors.h"
#include "w2a/numerics/layers.h"
#include "w2a/numerics/ops.h"

namespace w2a::policy {
namespace {

using chunkworld::Instruction;
using chunkworld::SimState;

constexpr std::size_t kTokens = 3;

layers::MlpSpec TokenSpec(std::size_t in, const ResidualConfig& c) {
  return {{in, c.hidden, c.latent_dim}, layers::Activation::kRelu};
}

layers::MlpSpec HeadSpec(const ResidualConfig& c) {
  return {{c.latent_dim, c.latent_dim, c.latent_dim}, layers::Activation::kGelu};
}

std::string LayerPrefix(std::size_t l) { return "res.layer" + std::to_string(l); }

Tensor StateFeatureRows(const std::vector<SimState>& states, const chunkworld::EpisodeSpec& spec) {
  Tensor out({states.size(), kStateFeatures});
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto f = StateFeatures(states[i], spec);
    std::copy(f.begin(), f.end(), out.data() + i * kStateFeatures);
  }
  return out;
}

void RequireFrozen(const BasePolicy& base, const adapters::AdapterBundle& bundle) {
  if (!base.frozen) throw ContractError("base policy must be frozen");
  if (!bundle.frozen()) throw ContractError("adapter bundle must be frozen");
}

Tensor ActionLatents(const BasePolicy& base, const adapters::AdapterBundle& bundle,
                     const Tensor& inputs) {
  Graph g(false);
  Var chunks = BaseForward(g, base, g.Constant(inputs));
  return adapters::ActionAdapterForward(g, bundle, chunks).value();
}

Tensor Decode(const adapters::AdapterBundle& bundle, const Tensor& z) {
  Graph g(false);
  return adapters::DecoderForward(g, bundle, g.Constant(z)).value();
}

// One executed chunk in world units.
std::vector<chunkworld::ActionVec> ChunkActions(const Tensor& chunks, std::size_t row) {
  const std::size_t width = chunks.cols();
  std::vector<chunkworld::ActionVec> out(width / chunkworld::kActionDim);
  for (std::size_t j = 0; j < out.size(); ++j)
    for (int k = 0; k < chunkworld::kActionDim; ++k)
      out[j][k] = std::clamp(chunks[row * width + j * 3 + k], -1.0, 1.0) * chunkworld::kActionBounds[k];
  return out;
}

double MeanChunkSimilarity(const Tensor& zv, const Tensor& za, std::size_t batch) {
  const std::size_t t = zv.rows() / batch, d = zv.cols();
  double sum = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor v({t, d}, std::vector<double>(zv.data() + b * t * d, zv.data() + (b + 1) * t * d));
    Tensor a({t, d}, std::vector<double>(za.data() + b * t * d, za.data() + (b + 1) * t * d));
    sum += align::ChunkSimilarity(v, a);
  }
  return sum / static_cast<double>(batch);
}

}  // namespace

ResidualPolicy ResidualPolicy::Initialize(const ResidualConfig& c, Rng& rng) {
  ResidualPolicy res{c, {}};
  ParameterRecord& p = res.params;
  Rng init = rng.Split("residual");
  layers::InitMlp(p, "res.state", TokenSpec(kStateFeatures, c), init);
  layers::InitLayerNorm(p, "res.state_ln", c.latent_dim);
  layers::InitMlp(p, "res.ctx", TokenSpec(kPolicyInput, c), init);
  layers::InitLayerNorm(p, "res.ctx_ln", c.latent_dim);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string pre = LayerPrefix(l);
    layers::InitLayerNorm(p, pre + ".ln1", c.latent_dim);
    for (const char* proj : {".q", ".k", ".v", ".o"}) {
      layers::InitLinear(p, pre + proj, c.latent_dim, c.latent_dim, init);
    }
    layers::InitLayerNorm(p, pre + ".ln2", c.latent_dim);
    layers::InitLinear(p, pre + ".ff1", c.latent_dim, c.ffn, init);
    layers::InitLinear(p, pre + ".ff2", c.ffn, c.latent_dim, init);
  }
  layers::InitLayerNorm(p, "res.out_ln", c.latent_dim);
  layers::InitMlp(p, "res.head", HeadSpec(c), init, /*zero_last=*/true);
  return res;
}

Var ResidualForward(Graph& g, const ResidualPolicy& res, Var z_base, Var state, Var context) {
  const ResidualConfig& c = res.config;
  const ParameterRecord& p = res.params;
  const std::size_t n = z_base.shape()[0];
  if (z_base.shape() != Shape{n, c.latent_dim} || state.shape() != Shape{n, kStateFeatures} ||
      context.shape() != Shape{n, kPolicyInput}) {
    throw DimensionError("residual inputs " + ShapeToString(z_base.shape()) + ", " +
                         ShapeToString(state.shape()) + ", " + ShapeToString(context.shape()));
  }
  Var s_tok = layers::ApplyLayerNorm(
      g, p, "res.state_ln", layers::ApplyMlp(g, p, "res.state", TokenSpec(kStateFeatures, c), state));
  Var c_tok = layers::ApplyLayerNorm(
      g, p, "res.ctx_ln", layers::ApplyMlp(g, p, "res.ctx", TokenSpec(kPolicyInput, c), context));
  // Token-major concat, then regroup so each sample's tokens are adjacent.
  std::vector<std::size_t> order(n * kTokens);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < kTokens; ++k) order[i * kTokens + k] = k * n + i;
  Var x = ops::GatherRows(ops::ConcatRows({z_base, s_tok, c_tok}), order);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string pre = LayerPrefix(l);
    Var h = layers::ApplyLayerNorm(g, p, pre + ".ln1", x);
    Var att = ops::MultiHeadAttention(layers::ApplyLinear(g, p, pre + ".q", h),
                                      layers::ApplyLinear(g, p, pre + ".k", h),
                                      layers::ApplyLinear(g, p, pre + ".v", h), kTokens, c.heads);
    x = ops::Add(x, layers::ApplyLinear(g, p, pre + ".o", att));
    h = layers::ApplyLayerNorm(g, p, pre + ".ln2", x);
    h = layers::ApplyLinear(g, p, pre + ".ff2", ops::Gelu(layers::ApplyLinear(g, p, pre + ".ff1", h)));
    x = ops::Add(x, h);
  }
  std::vector<std::size_t> action_rows(n);
  for (std::size_t i = 0; i < n; ++i) action_rows[i] = i * kTokens;
  Var h0 = layers::ApplyLayerNorm(g, p, "res.out_ln", ops::GatherRows(x, action_rows));
  return layers::ApplyMlp(g, p, "res.head", HeadSpec(c), h0);
}

RefinedBatch RefineBatch(const BasePolicy& base, const ResidualPolicy& res,
                         const adapters::AdapterBundle& bundle, const std::vector<SimState>& states,
                         const std::vector<Instruction>& instructions,
                         const chunkworld::EpisodeSpec& spec) {
  RequireFrozen(base, bundle);
  const Tensor inputs = PolicyInputs(states, instructions, spec);
  RefinedBatch out;
  out.z_base = ActionLatents(base, bundle, inputs);
  Graph g(false);
  Var zb = g.Constant(out.z_base);
  Var dz = ResidualForward(g, res, zb, g.Constant(StateFeatureRows(states, spec)), g.Constant(inputs));
  out.z_final = ops::Add(zb, dz).value();
  out.chunks = Decode(bundle, out.z_final);
  return out;
}

RefinedChunk RefineChunk(const BasePolicy& base, const ResidualPolicy& res,
                         const adapters::AdapterBundle& bundle, const SimState& s,
                         const Instruction& instruction, const chunkworld::EpisodeSpec& spec) {
  const RefinedBatch b = RefineBatch(base, res, bundle, {s}, {instruction}, spec);
  return {ChunkActions(b.chunks, 0), b.z_final.Reshaped({b.z_final.size()})};
}

ChunkFn RoutedChunkFn(const BasePolicy& base, const adapters::AdapterBundle& bundle,
                      const chunkworld::EpisodeSpec& spec) {
  return [&base, &bundle, spec](const std::vector<SimState>& s, const std::vector<Instruction>& l) {
    RequireFrozen(base, bundle);
    return Decode(bundle, ActionLatents(base, bundle, PolicyInputs(s, l, spec)));
  };
}

ChunkFn RefinedChunkFn(const BasePolicy& base, const ResidualPolicy& res,
                       const adapters::AdapterBundle& bundle, const chunkworld::EpisodeSpec& spec) {
  return [&base, &res, &bundle, spec](const std::vector<SimState>& s,
                                      const std::vector<Instruction>& l) {
    return RefineBatch(base, res, bundle, s, l, spec).chunks;
  };
}

namespace {

// z_final for one chunk boundary; only the residual is on the tape.
Var FinalLatents(Graph& g, const BasePolicy& base, const ResidualPolicy& res,
                 const adapters::AdapterBundle& bundle, const std::vector<SimState>& states,
                 const std::vector<Instruction>& instructions, const chunkworld::EpisodeSpec& spec) {
  const Tensor inputs = PolicyInputs(states, instructions, spec);
  Var zb = g.Constant(ActionLatents(base, bundle, inputs));
  Var dz = ResidualForward(g, res, zb, g.Constant(StateFeatureRows(states, spec)), g.Constant(inputs));
  return ops::Add(zb, dz);
}

}  // namespace

void Stage2Config::Validate() const {
  if (parallel_rollouts < 2) throw ConfigError("stage 2 needs at least 2 parallel rollouts");
  if (iterations < 0) throw ConfigError("stage-2 iterations must be non-negative");
  if (!(lr > 0.0)) throw ConfigError("stage-2 learning rate must be positive");
  if (eval_every < 0 || eval_episodes < 0) throw ConfigError("invalid stage-2 evaluation schedule");
  contrastive.Validate();
}

Stage2Batch BuildStage2Loss(Graph& g, const BasePolicy& base, const ResidualPolicy& res,
                            const adapters::AdapterBundle& bundle,
                            const std::vector<Instruction>& instructions, const Tensor& video_latents,
                            const Stage2Config& cfg, const chunkworld::EpisodeSpec& spec) {
  RequireFrozen(base, bundle);
  const std::size_t b = instructions.size();
  const std::size_t t_count = static_cast<std::size_t>(spec.chunk_count);
  if (video_latents.rank() != 2 || video_latents.rows() != b * t_count) {
    throw DimensionError("video latents " + ShapeToString(video_latents.shape()) + " do not match " +
                         std::to_string(b) + " rollouts of " + std::to_string(t_count) + " chunks");
  }
  std::vector<SimState> states(b);
  for (std::size_t i = 0; i < b; ++i) states[i] = chunkworld::InitialState(instructions[i], spec);
  std::vector<std::size_t> finished(b, t_count);  // chunk after which a rollout stopped
  std::vector<Var> per_chunk;
  Stage2Batch out;
  for (std::size_t t = 0; t < t_count; ++t) {
    out.chunk_states.push_back(states);
    Var zf = FinalLatents(g, base, res, bundle, states, instructions, spec);
    per_chunk.push_back(zf);
    const Tensor chunks = Decode(bundle, zf.value());
    for (std::size_t i = 0; i < b; ++i) {
      if (finished[i] < t_count) continue;
      for (const auto& a : ChunkActions(chunks, i)) {
        states[i] = chunkworld::Step(states[i], a, spec);
        if (cfg.terminate_on_success && chunkworld::Success(states[i], instructions[i], spec)) {
          finished[i] = t;
          break;
        }
      }
    }
  }
  out.rows.resize(b * t_count);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t t = 0; t < t_count; ++t) {
      const std::size_t eff = std::min(t, finished[i]);
      if (eff != t) ++out.padded_chunks;
      out.rows[i * t_count + t] = eff * b + i;
    }
  }
  out.action_latents = ops::GatherRows(ops::ConcatRows(per_chunk), out.rows);
  out.loss = align::ContrastiveLoss(g.Constant(video_latents), out.action_latents, b, cfg.contrastive);
  return out;
}

Var Stage2LossOnStates(Graph& g, const BasePolicy& base, const ResidualPolicy& res,
                       const adapters::AdapterBundle& bundle,
                       const std::vector<Instruction>& instructions, const Stage2Batch& visited,
                       const Tensor& video_latents, const Stage2Config& cfg,
                       const chunkworld::EpisodeSpec& spec) {
  RequireFrozen(base, bundle);
  std::vector<Var> per_chunk;
  for (const auto& states : visited.chunk_states) {
    per_chunk.push_back(FinalLatents(g, base, res, bundle, states, instructions, spec));
  }
  Var latents = ops::GatherRows(ops::ConcatRows(per_chunk), visited.rows);
  return align::ContrastiveLoss(g.Constant(video_latents), latents, instructions.size(), cfg.contrastive);
}

Tensor ImaginedTargets(const worldmodel::ImaginationEngine& engine,
                       const adapters::AdapterBundle& bundle,
                       const std::vector<Instruction>& instructions, Rng& noise) {
  std::vector<worldmodel::VideoLatentChunk> grids;
  const int t_count = engine.spec().chunk_count;
  for (std::size_t i = 0; i < instructions.size(); ++i) {
    Rng stream = noise.Split(static_cast<std::uint64_t>(i));
    const SimState s1 = chunkworld::InitialState(instructions[i], engine.spec());
    auto rollout = engine.Imagine(s1, instructions[i], t_count, &stream);
    for (auto& v : rollout.latents) grids.push_back(std::move(v));
  }
  return adapters::EncodeVideo(bundle, grids);
}

Stage2Result Stage2Train(const BasePolicy& base, ResidualPolicy res,
                         const adapters::AdapterBundle& bundle,
                         const worldmodel::ImaginationEngine& engine, const Stage2Config& cfg) {
  cfg.Validate();
  RequireFrozen(base, bundle);
  const chunkworld::EpisodeSpec& spec = engine.spec();
  Rng root = Rng(cfg.seed).Split("stage2");
  Rng iters = root.Split("iterations");
  AdamState adam = MakeAdam(cfg.lr);
  Stage2Result result{std::move(res), {}, 0};
  const std::vector<Instruction> eval_set =
      EvalInstructions(cfg.eval_episodes, root.Split("eval").NextU64());
  for (int it = 1; it <= cfg.iterations; ++it) {
    Rng r = iters.Split(static_cast<std::uint64_t>(it));
    Rng sampler = r.Split("instructions");
    std::vector<Instruction> instructions;
    for (std::size_t i = 0; i < cfg.parallel_rollouts; ++i) {
      const auto task = chunkworld::kAllTasks[sampler.Below(chunkworld::kTaskCount)];
      instructions.push_back(chunkworld::SampleInstruction(task, sampler));
    }
    Rng noise = r.Split("artifact");
    const Tensor targets = ImaginedTargets(engine, bundle, instructions, noise);
    Graph g;
    Stage2Batch batch =
        BuildStage2Loss(g, base, result.residual, bundle, instructions, targets, cfg, spec);
    const ParameterRecord grads = g.Backward(batch.loss);
    Stage2Metric m;
    m.iter = it;
    m.loss = batch.loss.value()[0];
    m.pos_sim = MeanChunkSimilarity(targets, batch.action_latents.value(), cfg.parallel_rollouts);
    result.padded_chunks += batch.padded_chunks;
    AdamStep(result.residual.params, grads, adam);
    if (cfg.eval_every > 0 && cfg.eval_episodes > 0 &&
        (it % cfg.eval_every == 0 || it == cfg.iterations)) {
      m.success_rate =
          Evaluate(RefinedChunkFn(base, result.residual, bundle, spec), eval_set, spec).rate();
    }
    result.log.push_back(m);
  }
  return result;
}

}  // namespace w2a::policy
