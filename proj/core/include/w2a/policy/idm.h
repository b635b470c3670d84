#ifndef W2A_POLICY_IDM_H_
#define W2A_POLICY_IDM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "w2a/policy/base_policy.h"
#include "w2a/worldmodel/engine.h"

// Inverse-dynamics baseline: label imagined latents with pseudo-actions and
// fine-tune the base policy on them.
namespace w2a::policy {

struct IdmConfig {
  int steps = 2000;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t hidden = 256;
};

// MLP 2*(C*H*W) -> 256 -> 256 -> M*A over (V_{t-1}, V_t).
struct IdmModel {
  ParameterRecord net;
  bool trained = false;
  double heldout_mse = 0.0;  // normalized action units
};

// [T, 2*C*H*W]; the first row pairs `first_prev` with latents[0].
Tensor IdmInputs(const worldmodel::VideoLatentChunk& first_prev,
                 std::span<const worldmodel::VideoLatentChunk> latents);
Var IdmForward(Graph& g, const IdmModel& model, Var inputs);

// Trains on encode_render latents of demo trajectories; the chunk before the
// first is the still latent of the initial state. A seeded tenth of the
// demos is held out to measure `heldout_mse`.
IdmModel IdmTrain(const std::vector<chunkworld::Demonstration>& demos,
                  const worldmodel::ImaginationEngine& engine, const IdmConfig& cfg);

// Normalized chunks [T, M*A]. ContractError for an untrained model.
Tensor IdmPredict(const IdmModel& model, const worldmodel::VideoLatentChunk& first_prev,
                  std::span<const worldmodel::VideoLatentChunk> latents);

struct IdmBaselineConfig {
  int instructions = 400;
  int finetune_steps = 1500;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

struct IdmSourceReport {
  double label_mse = 0.0;  // pseudo-labels vs hidden expert actions, normalized
  BasePolicy policy;       // fine-tuned copy of the base, frozen
};

struct IdmBaselineReport {
  IdmSourceReport clean;
  IdmSourceReport artifact;
  double mse_ratio = 0.0;  // artifact / clean
};

// Pseudo-labels `cfg.instructions` imaginations from `engine` with artifacts
// off and with `artifact`, then fine-tunes one base copy per source.
IdmBaselineReport IdmBaseline(const IdmModel& idm, const BasePolicy& base,
                              const worldmodel::ImaginationEngine& engine,
                              const worldmodel::ArtifactConfig& artifact,
                              const IdmBaselineConfig& cfg);

}  // namespace w2a::policy

#endif  // W2A_POLICY_IDM_H_
