#ifndef W2A_PIPELINE_STAGES_H_
#define W2A_PIPELINE_STAGES_H_

#include <filesystem>
#include <string>
#include <vector>

#include "w2a/adapters/adapters.h"
#include "w2a/pipeline/config.h"
#include "w2a/pipeline/demo_io.h"
#include "w2a/policy/base_policy.h"
#include "w2a/policy/idm.h"
#include "w2a/policy/residual.h"
#include "w2a/skillseg/skillseg.h"
#include "w2a/worldmodel/engine.h"

// The stage glue shared by the command-line tool and the acceptance tests:
// checkpoint locations, loading with dependency checks, and the small
// conversions between datasets and stage inputs.
namespace w2a::pipeline {

// Checkpoint files under paths.checkpoints.
std::filesystem::path BaseCheckpoint(const RunConfig& config);
std::filesystem::path Stage1Checkpoint(const RunConfig& config);
std::filesystem::path Stage2Checkpoint(const RunConfig& config);
std::filesystem::path IdmCheckpoint(const RunConfig& config);

// Each throws DependencyError naming the stage that writes the file when it
// does not exist. Loaded components are frozen where the pipeline needs
// them frozen.
policy::BasePolicy LoadBasePolicy(const RunConfig& config);
adapters::AdapterBundle LoadAdapterBundle(const RunConfig& config);
policy::ResidualPolicy LoadResidual(const RunConfig& config);
policy::IdmModel LoadIdm(const RunConfig& config);

// Saves `record` and returns it as a later load will see it.
ParameterRecord SaveParams(const std::filesystem::path& path, const ParameterRecord& record);

// Demos of paths.demos, truncated to whole chunks. `dropped_steps` receives
// the number of actions removed by truncation.
std::vector<chunkworld::Demonstration> LoadDemos(const RunConfig& config,
                                                 std::size_t* dropped_steps = nullptr);

std::vector<adapters::Stage1Example> Stage1Examples(const std::vector<chunkworld::Demonstration>& demos,
                                                    const worldmodel::ImaginationEngine& engine);

// Fresh residual drawn from the run seed, as Stage 2 starts from.
policy::ResidualPolicy FreshResidual(const RunConfig& config);

enum class PolicyKind { kBase, kRouted, kRefined };
std::string_view PolicyKindName(PolicyKind kind);
std::optional<PolicyKind> ParsePolicyKind(std::string_view name);

// Chunk function of `kind`. The refined policy uses `residual`; the others
// ignore it.
policy::ChunkFn MakeChunkFn(PolicyKind kind, const policy::BasePolicy& base,
                            const adapters::AdapterBundle* bundle,
                            const policy::ResidualPolicy* residual,
                            const chunkworld::EpisodeSpec& spec);

struct SegmentedDemo {
  std::int64_t demo_id = 0;
  std::string task;
  skillseg::Alignment alignment;
};

struct SegmentationSummary {
  std::vector<SegmentedDemo> demos;
  double sync_rate = 0.0;  // fraction of demos whose alignment is accepted
  skillseg::LengthReport lengths;
};

// Classify, segment and align every record against the default schema.
// Original lengths are whole-demo action counts; segmented lengths are the
// accepted non-noise segments.
SegmentationSummary SegmentRecords(const std::vector<DemoRecord>& records,
                                   const skillseg::SegConfig& cfg = {});

// One JSON line per labeled segment of an accepted demo, keys demo_id, task,
// label, start, end. NOISE segments are left out.
std::string SegmentsJsonl(const SegmentationSummary& summary);
// Plain-text stats report: demo count, sync rate and the length statistics.
std::string SegmentationReport(const SegmentationSummary& summary);

}  // namespace w2a::pipeline

#endif  // W2A_PIPELINE_STAGES_H_
