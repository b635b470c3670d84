#ifndef W2A_PIPELINE_CONFIG_H_
#define W2A_PIPELINE_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>

#include "w2a/adapters/adapters.h"
#include "w2a/chunkworld/world.h"
#include "w2a/policy/base_policy.h"
#include "w2a/policy/idm.h"
#include "w2a/policy/residual.h"
#include "w2a/worldmodel/engine.h"

// Run configuration as versioned JSON. Parsing is strict: unknown keys, wrong
// types and unsupported versions are ConfigErrors. Keys that are absent keep
// their defaults.
namespace w2a::pipeline {

inline constexpr int kConfigVersion = 1;
inline constexpr const char* kSeedEnvVar = "W2A_SEED";

struct RunPaths {
  std::filesystem::path demos = "demos.jsonl";
  std::filesystem::path checkpoints = "checkpoints";
  std::filesystem::path metrics = "metrics";
};

struct RunConfig {
  int version = kConfigVersion;
  std::uint64_t seed = 0;
  RunPaths paths;
  chunkworld::EpisodeSpec env;
  adapters::Stage1Config stage1;
  policy::Stage2Config stage2;
  policy::BcConfig bc;  // demo_count and label_noise are the degrade settings
  worldmodel::ArtifactConfig artifact;
  policy::IdmConfig idm;
  policy::IdmBaselineConfig idm_baseline;
  int eval_episodes = 500;
  std::uint64_t eval_seed = 99;

  // The run seed, copied into every stage config.
  void PropagateSeed();
  void Validate() const;
};

// The desk-scale defaults.
RunConfig DefaultRunConfig();

std::string SerializeConfig(const RunConfig& config);
RunConfig ParseConfig(std::string_view text);

// Replaces the seed with W2A_SEED when that is set; ConfigError when it is
// not an unsigned integer.
void ApplySeedOverride(RunConfig& config);
// Reads and parses `path`, then applies the seed override.
RunConfig LoadRunConfig(const std::filesystem::path& path);
void SaveRunConfig(const std::filesystem::path& path, const RunConfig& config);

}  // namespace w2a::pipeline

#endif  // W2A_PIPELINE_CONFIG_H_
