#include "w2a/worldmodel/engine.h"

#include <cmath>

#include "w2a/numerics/errors.h"

namespace w2a::worldmodel {

using chunkworld::SimState;

std::string_view ArtifactModeName(ArtifactMode mode) {
  switch (mode) {
    case ArtifactMode::kNone: return "none";
    case ArtifactMode::kLatentNoise: return "latent_noise";
    case ArtifactMode::kObjectDropout: return "object_dropout";
  }
  return "unknown";
}

ChunkStateSummary Summarize(const SimState& chunk_start, std::span<const SimState> chunk_states) {
  if (chunk_states.empty()) throw DimensionError("empty chunk");
  const SimState& last = chunk_states.back();
  const double m = static_cast<double>(chunk_states.size());
  return {
      2.0 * last.gripper.x - 1.0,
      2.0 * last.gripper.y - 1.0,
      2.0 * last.aperture / chunkworld::kOpenWidth - 1.0,
      2.0 * last.object.x - 1.0,
      2.0 * last.object.y - 1.0,
      last.attached ? 1.0 : -1.0,
      (last.gripper.x - chunk_start.gripper.x) / m / chunkworld::kMaxMove,
      (last.gripper.y - chunk_start.gripper.y) / m / chunkworld::kMaxMove,
      (last.aperture - chunk_start.aperture) / m / chunkworld::kMaxGrip,
  };
}

ImaginationEngine::ImaginationEngine(ArtifactConfig artifact, chunkworld::EpisodeSpec spec,
                                     std::uint64_t feature_seed)
    : artifact_(artifact), spec_(spec) {
  if (artifact_.noise_sigma < 0.0 || artifact_.dropout_prob < 0.0 || artifact_.dropout_prob > 1.0) {
    throw ConfigError("artifact parameters out of range");
  }
  Rng rng = Rng(feature_seed).Split("feature_map");
  const double in_bound = std::sqrt(3.0 / static_cast<double>(kSummaryDim));
  feature_map_.Set("feature.w1", UniformInit({kSummaryDim, kFeatureHidden}, in_bound, rng));
  feature_map_.Set("feature.b1", UniformInit({kFeatureHidden}, 0.1, rng));
  feature_map_.Set("feature.w2", GlorotInit(kFeatureHidden, kLatentSize, rng));
  feature_map_.Set("feature.b2", Tensor({kLatentSize}, 0.0));
}

ImaginationEngine ImaginationEngine::WithArtifact(ArtifactConfig artifact) const {
  ImaginationEngine copy = *this;
  if (artifact.noise_sigma < 0.0 || artifact.dropout_prob < 0.0 || artifact.dropout_prob > 1.0) {
    throw ConfigError("artifact parameters out of range");
  }
  copy.artifact_ = artifact;
  return copy;
}

VideoLatentChunk ImaginationEngine::EncodeSummary(const ChunkStateSummary& summary) const {
  const Tensor& w1 = feature_map_.Get("feature.w1");
  const Tensor& b1 = feature_map_.Get("feature.b1");
  const Tensor& w2 = feature_map_.Get("feature.w2");
  const Tensor& b2 = feature_map_.Get("feature.b2");
  std::array<double, kFeatureHidden> hidden{};
  for (std::size_t j = 0; j < kFeatureHidden; ++j) {
    double acc = b1[j];
    for (std::size_t i = 0; i < kSummaryDim; ++i) acc += summary[i] * w1[i * kFeatureHidden + j];
    hidden[j] = std::tanh(acc);
  }
  Tensor out({kLatentChannels, kLatentHeight, kLatentWidth});
  for (std::size_t k = 0; k < kLatentSize; ++k) {
    double acc = b2[k];
    for (std::size_t j = 0; j < kFeatureHidden; ++j) acc += hidden[j] * w2[j * kLatentSize + k];
    out[k] = acc;
  }
  return out;
}

VideoLatentChunk ImaginationEngine::EncodeRender(const SimState& chunk_start,
                                                 std::span<const SimState> chunk_states) const {
  if (static_cast<int>(chunk_states.size()) != spec_.chunk_size) {
    throw DimensionError("encode_render needs exactly " + std::to_string(spec_.chunk_size) +
                         " states, got " + std::to_string(chunk_states.size()));
  }
  return EncodeSummary(Summarize(chunk_start, chunk_states));
}

VideoLatentChunk ImaginationEngine::EncodeStill(const SimState& s) const {
  const SimState one[] = {s};
  return EncodeSummary(Summarize(s, one));
}

std::vector<VideoLatentChunk> ImaginationEngine::EncodeTrajectory(
    std::span<const SimState> states) const {
  const std::size_t m = static_cast<std::size_t>(spec_.chunk_size);
  if (states.size() < m + 1 || (states.size() - 1) % m != 0) {
    throw ChunkingError("trajectory of " + std::to_string(states.size()) +
                        " states is not T*M + 1 for M = " + std::to_string(m));
  }
  std::vector<VideoLatentChunk> out;
  for (std::size_t t = 0; t + 1 < states.size(); t += m) {
    out.push_back(EncodeRender(states[t], states.subspan(t + 1, m)));
  }
  return out;
}

ImaginedRollout ImaginationEngine::Imagine(const SimState& s1,
                                           const chunkworld::Instruction& instruction, int chunks,
                                           Rng* noise) const {
  if (chunks < 1) throw ContractError("imagine needs at least one chunk");
  try {
    chunkworld::CheckSolvable(instruction, spec_);
  } catch (const PlannerError& e) {
    throw PlannerError(std::string("imagination failed: ") + e.what());
  }
  if (artifact_.mode != ArtifactMode::kNone && !noise) {
    throw ContractError("artifact injection needs a noise stream");
  }
  Rng planner_rng = Rng(0).Split("planner");  // sigma 0: never drawn from
  chunkworld::Demonstration plan = chunkworld::ExpertRolloutFrom(
      s1, instruction, spec_, chunks * spec_.chunk_size, planner_rng, 0.0);

  ImaginedRollout out;
  const std::size_t m = static_cast<std::size_t>(spec_.chunk_size);
  std::span<const SimState> states(plan.states);
  for (int t = 0; t < chunks; ++t) {
    const std::size_t begin = static_cast<std::size_t>(t) * m;
    ChunkStateSummary summary = Summarize(states[begin], states.subspan(begin + 1, m));
    if (artifact_.mode == ArtifactMode::kObjectDropout && noise->Uniform() < artifact_.dropout_prob) {
      summary[3] = 0.0;
      summary[4] = 0.0;
    }
    VideoLatentChunk latent = EncodeSummary(summary);
    if (artifact_.mode == ArtifactMode::kLatentNoise && artifact_.noise_sigma > 0.0) {
      for (std::size_t k = 0; k < latent.size(); ++k) latent[k] += noise->Normal(0.0, artifact_.noise_sigma);
    }
    out.latents.push_back(std::move(latent));
  }
  out.states = std::move(plan.states);
  out.expert_actions = std::move(plan.actions);
  return out;
}

}  // namespace w2a::worldmodel
