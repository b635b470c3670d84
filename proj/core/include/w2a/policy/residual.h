#ifndef W2A_POLICY_RESIDUAL_H_
#define W2A_POLICY_RESIDUAL_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "w2a/adapters/adapters.h"
#include "w2a/policy/base_policy.h"
#include "w2a/worldmodel/engine.h"

namespace w2a::policy {

// f_theta. Three tokens per sample: the base action latent, a state token
// (FC 8->128, ReLU, FC 128->D, LayerNorm) and an instruction+state token of
// the same shape. Two pre-norm self-attention layers (4 heads, width D) mix
// them, and an MLP head on the action token yields delta z. The head's last
// layer starts at zero, so a fresh residual leaves z_base unchanged.
struct ResidualConfig {
  std::size_t latent_dim = 32;
  std::size_t hidden = 128;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn = 64;
};

struct ResidualPolicy {
  ResidualConfig config;
  ParameterRecord params;

  static ResidualPolicy Initialize(const ResidualConfig& config, Rng& rng);
};

// z_base [N, D], state features [N, 8], instruction+state features [N, 16].
Var ResidualForward(Graph& g, const ResidualPolicy& res, Var z_base, Var state, Var context);

struct RefinedBatch {
  Tensor z_base;   // [N, D]
  Tensor z_final;  // [N, D]
  Tensor chunks;   // [N, M*A] normalized, unclipped decoder output
};

// ContractError unless both the base policy and the bundle are frozen.
RefinedBatch RefineBatch(const BasePolicy& base, const ResidualPolicy& res,
                         const adapters::AdapterBundle& bundle,
                         const std::vector<chunkworld::SimState>& states,
                         const std::vector<chunkworld::Instruction>& instructions,
                         const chunkworld::EpisodeSpec& spec);

struct RefinedChunk {
  std::vector<chunkworld::ActionVec> actions;  // M actions, clipped, world units
  Tensor z_final;                              // [D]
};
RefinedChunk RefineChunk(const BasePolicy& base, const ResidualPolicy& res,
                         const adapters::AdapterBundle& bundle, const chunkworld::SimState& s,
                         const chunkworld::Instruction& instruction,
                         const chunkworld::EpisodeSpec& spec = {});

// pi_base routed through D_a(B_a(.)); equal to the refined policy with a
// zero residual.
ChunkFn RoutedChunkFn(const BasePolicy& base, const adapters::AdapterBundle& bundle,
                      const chunkworld::EpisodeSpec& spec);
ChunkFn RefinedChunkFn(const BasePolicy& base, const ResidualPolicy& res,
                       const adapters::AdapterBundle& bundle, const chunkworld::EpisodeSpec& spec);

struct Stage2Config {
  std::size_t parallel_rollouts = 16;
  int iterations = 2000;
  double lr = 3e-4;
  std::uint64_t seed = 0;
  align::ContrastiveConfig contrastive;
  int eval_every = 0;  // 0 disables in-training evaluation
  int eval_episodes = 100;
  // Finished rollouts repeat their last latent for the remaining chunks.
  bool terminate_on_success = false;
  ResidualConfig residual;
  void Validate() const;
};

struct Stage2Metric {
  int iter = 0;
  double loss = 0.0;
  double pos_sim = 0.0;
  std::optional<double> success_rate;
};

struct Stage2Result {
  ResidualPolicy residual;
  std::vector<Stage2Metric> log;
  long padded_chunks = 0;
};

// Stage-2 loss for one batch of rollouts: rolls `res` from each initial
// state for T chunks and scores the collected latents against `video_latents`
// ([B*T, D], sample-major). Exposed for gradient checks.
struct Stage2Batch {
  Var loss;
  Var action_latents;  // [B*T, D]
  long padded_chunks = 0;
  std::vector<std::vector<chunkworld::SimState>> chunk_states;  // [T][B] states at chunk starts
  std::vector<std::size_t> rows;  // gather order from chunk-major latents to sample-major
};
Stage2Batch BuildStage2Loss(Graph& g, const BasePolicy& base, const ResidualPolicy& res,
                            const adapters::AdapterBundle& bundle,
                            const std::vector<chunkworld::Instruction>& instructions,
                            const Tensor& video_latents, const Stage2Config& cfg,
                            const chunkworld::EpisodeSpec& spec);

// The same loss with the environment frozen at the states `visited` went
// through. Equal to visited.loss for the residual that produced it; used for
// finite-difference checks, where the rollout must not move.
Var Stage2LossOnStates(Graph& g, const BasePolicy& base, const ResidualPolicy& res,
                       const adapters::AdapterBundle& bundle,
                       const std::vector<chunkworld::Instruction>& instructions,
                       const Stage2Batch& visited, const Tensor& video_latents,
                       const Stage2Config& cfg, const chunkworld::EpisodeSpec& spec);

// Imagined video latents of every instruction through B_v, stacked [B*T, D].
Tensor ImaginedTargets(const worldmodel::ImaginationEngine& engine,
                       const adapters::AdapterBundle& bundle,
                       const std::vector<chunkworld::Instruction>& instructions, Rng& noise);

Stage2Result Stage2Train(const BasePolicy& base, ResidualPolicy res,
                         const adapters::AdapterBundle& bundle,
                         const worldmodel::ImaginationEngine& engine, const Stage2Config& cfg);

}  // namespace w2a::policy

#endif  // W2A_POLICY_RESIDUAL_H_
