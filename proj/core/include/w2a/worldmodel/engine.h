#ifndef W2A_WORLDMODEL_ENGINE_H_
#define W2A_WORLDMODEL_ENGINE_H_

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "w2a/chunkworld/world.h"
#include "w2a/numerics/parameters.h"
#include "w2a/numerics/rng.h"
#include "w2a/numerics/tensor.h"

namespace w2a::worldmodel {

inline constexpr std::size_t kLatentChannels = 4;
inline constexpr std::size_t kLatentHeight = 6;
inline constexpr std::size_t kLatentWidth = 6;
inline constexpr std::size_t kLatentSize = kLatentChannels * kLatentHeight * kLatentWidth;
inline constexpr std::size_t kSummaryDim = 9;
inline constexpr std::size_t kFeatureHidden = 64;
inline constexpr std::uint64_t kFeatureMapSeed = 7;

// Toy stand-in for one video-VAE latent: a [C, H, W] grid.
using VideoLatentChunk = Tensor;

enum class ArtifactMode { kNone, kLatentNoise, kObjectDropout };
std::string_view ArtifactModeName(ArtifactMode mode);

struct ArtifactConfig {
  ArtifactMode mode = ArtifactMode::kNone;
  double noise_sigma = 0.0;
  double dropout_prob = 0.0;
};

// What the toy "video" observes about a chunk: gripper (2), aperture (1),
// object (2), attached (1) at the chunk's final step, and the mean per-step
// motion (dgx, dgy, dw) realised over the chunk. Entries are scaled to
// roughly [-1, 1] before the feature map.
using ChunkStateSummary = std::array<double, kSummaryDim>;
ChunkStateSummary Summarize(const chunkworld::SimState& chunk_start,
                            std::span<const chunkworld::SimState> chunk_states);

struct ImaginedRollout {
  std::vector<VideoLatentChunk> latents;              // T grids
  std::vector<chunkworld::SimState> states;           // T*M + 1, internal planner
  std::vector<chunkworld::ActionVec> expert_actions;  // T*M, hidden; oracle use only
};

// Frozen imagination engine. Given (s1, instruction) it rolls its internal
// expert planner and maps each chunk summary through a fixed random
// tanh feature map into a latent grid. Nothing here is trainable.
class ImaginationEngine {
 public:
  explicit ImaginationEngine(ArtifactConfig artifact = {}, chunkworld::EpisodeSpec spec = {},
                             std::uint64_t feature_seed = kFeatureMapSeed);

  // `noise` is only consulted for artifact injection; with mode kNone the
  // output is a pure function of (s1, instruction, chunks).
  ImaginedRollout Imagine(const chunkworld::SimState& s1, const chunkworld::Instruction& instruction,
                          int chunks, Rng* noise = nullptr) const;

  // Ground-truth pathway: the same feature map applied to an observed chunk.
  // `chunk_states` holds exactly M post-action states.
  VideoLatentChunk EncodeRender(const chunkworld::SimState& chunk_start,
                                std::span<const chunkworld::SimState> chunk_states) const;
  VideoLatentChunk EncodeSummary(const ChunkStateSummary& summary) const;
  // Latent of a motionless chunk at `s`; used as the "previous" frame of the
  // first chunk by the inverse dynamics model.
  VideoLatentChunk EncodeStill(const chunkworld::SimState& s) const;

  // Encodes every chunk of a state trajectory of length T*M + 1.
  std::vector<VideoLatentChunk> EncodeTrajectory(std::span<const chunkworld::SimState> states) const;

  const ParameterRecord& feature_map() const { return feature_map_; }
  const ArtifactConfig& artifact() const { return artifact_; }
  const chunkworld::EpisodeSpec& spec() const { return spec_; }
  ImaginationEngine WithArtifact(ArtifactConfig artifact) const;

 private:
  ArtifactConfig artifact_;
  chunkworld::EpisodeSpec spec_;
  ParameterRecord feature_map_;
};

}  // namespace w2a::worldmodel

#endif  // W2A_WORLDMODEL_ENGINE_H_
