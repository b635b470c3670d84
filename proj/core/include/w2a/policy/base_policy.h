#ifndef W2A_POLICY_BASE_POLICY_H_
#define W2A_POLICY_BASE_POLICY_H_

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "w2a/chunkworld/world.h"
#include "w2a/numerics/graph.h"
#include "w2a/numerics/parameters.h"

namespace w2a::policy {

inline constexpr std::size_t kStateFeatures = 8;
inline constexpr std::size_t kInstructionFeatures = 8;
inline constexpr std::size_t kPolicyInput = kStateFeatures + kInstructionFeatures;

// gripper (2), aperture, object (2), attached, sin/cos of the episode phase;
// all scaled to roughly [-1, 1].
std::array<double, kStateFeatures> StateFeatures(const chunkworld::SimState& s,
                                                 const chunkworld::EpisodeSpec& spec);
// Task one-hot, then object start and goal scaled to [-1, 1].
std::array<double, kInstructionFeatures> InstructionFeatures(const chunkworld::Instruction& ins);
// [N, 16]: state features ++ instruction features per row.
Tensor PolicyInputs(const std::vector<chunkworld::SimState>& states,
                    const std::vector<chunkworld::Instruction>& instructions,
                    const chunkworld::EpisodeSpec& spec);

// MLP 16 -> 128 -> 128 -> M*A, GELU, producing a normalized action chunk.
struct BasePolicy {
  ParameterRecord net;
  bool frozen = false;

  static BasePolicy Initialize(Rng& rng, std::size_t chunk_width = 12);
  std::size_t chunk_width() const;
  // Unfrozen copy for fine-tuning.
  BasePolicy Thawed() const { return {net, false}; }
};

Var BaseForward(Graph& g, const BasePolicy& policy, Var inputs);
// [N, M*A] normalized, unclipped.
Tensor BaseChunks(const BasePolicy& policy, const Tensor& inputs);

struct BcConfig {
  int epochs = 40;
  std::size_t batch_size = 64;
  double lr = 3e-3;
  std::uint64_t seed = 0;
  std::size_t demo_count = 0;  // 0 keeps every demo
  double label_noise = 0.0;    // world-unit Gaussian noise on target actions
  std::size_t stride = 1;      // window start spacing in low-level steps
};

// One regression sample: the policy input at a chunk boundary and the
// normalized target chunk.
struct ChunkSample {
  std::array<double, kPolicyInput> input;
  std::vector<double> target;
};

// Windows of M actions starting every `stride` steps; 0 means every chunk
// boundary.
std::vector<ChunkSample> ChunkSamples(const std::vector<chunkworld::Demonstration>& demos,
                                      const chunkworld::EpisodeSpec& spec, std::size_t stride = 0);

// Mean squared error regression on `samples`, updating `policy` in place.
// FrozenError when the policy is frozen.
void RegressChunks(BasePolicy& policy, const std::vector<ChunkSample>& samples, int steps,
                   std::size_t batch_size, double lr, Rng& rng);

// Behavior cloning on expert chunks; returns a frozen policy.
BasePolicy BcTrain(const std::vector<chunkworld::Demonstration>& demos, const BcConfig& cfg,
                   const chunkworld::EpisodeSpec& spec = {});

// --- closed-loop execution ---

// Maps a batch of (state, instruction) to normalized chunks [N, M*A].
using ChunkFn = std::function<Tensor(const std::vector<chunkworld::SimState>&,
                                     const std::vector<chunkworld::Instruction>&)>;

ChunkFn BaseChunkFn(const BasePolicy& policy, const chunkworld::EpisodeSpec& spec);

struct Episode {
  std::vector<chunkworld::SimState> states;  // executed states, first is s1
  bool success = false;
};

// Runs every instruction from its initial state, querying `fn` once per chunk
// and executing the clipped chunk open-loop. With stop_on_success an episode
// ends at the first step where the success predicate holds.
std::vector<Episode> RunEpisodes(const ChunkFn& fn, const std::vector<chunkworld::Instruction>& instructions,
                                 const chunkworld::EpisodeSpec& spec, bool stop_on_success = true);

struct EvalReport {
  int episodes = 0;
  int successes = 0;
  std::map<std::string, std::pair<int, int>> per_task;  // task -> (successes, episodes)
  double rate() const { return episodes ? static_cast<double>(successes) / episodes : 0.0; }
};

// `count` instructions cycling through the four tasks, drawn from `seed`.
std::vector<chunkworld::Instruction> EvalInstructions(int count, std::uint64_t seed);
EvalReport Evaluate(const ChunkFn& fn, const std::vector<chunkworld::Instruction>& instructions,
                    const chunkworld::EpisodeSpec& spec);
std::string FormatReport(const EvalReport& report);

// Mean squared error, in normalized units, between the executed (clipped)
// chunk of `fn` and the expert chunk at every chunk boundary of `demos`.
double ActionMseProbe(const ChunkFn& fn, const std::vector<chunkworld::Demonstration>& demos,
                      const chunkworld::EpisodeSpec& spec);

}  // namespace w2a::policy

#endif  // W2A_POLICY_BASE_POLICY_H_
