#include "w2a/pipeline/stages.h"

#include <nlohmann/json.hpp>

#include "w2a/numerics/checkpoint.h"
#include "w2a/numerics/errors.h"
#include "w2a/pipeline/metrics.h"

namespace w2a::pipeline {
namespace {

ParameterRecord LoadStage(const std::filesystem::path& path, std::string_view stage) {
  if (!std::filesystem::exists(path)) {
    throw DependencyError("missing " + std::string(stage) + " checkpoint " + path.string() + "; run " +
                          std::string(stage) + " first");
  }
  return LoadCheckpoint(path);
}

}  // namespace

std::filesystem::path BaseCheckpoint(const RunConfig& c) { return c.paths.checkpoints / "base.ckpt"; }
std::filesystem::path Stage1Checkpoint(const RunConfig& c) { return c.paths.checkpoints / "stage1.ckpt"; }
std::filesystem::path Stage2Checkpoint(const RunConfig& c) { return c.paths.checkpoints / "stage2.ckpt"; }
std::filesystem::path IdmCheckpoint(const RunConfig& c) { return c.paths.checkpoints / "idm.ckpt"; }

policy::BasePolicy LoadBasePolicy(const RunConfig& c) {
  return {LoadStage(BaseCheckpoint(c), "train-base"), true};
}

adapters::AdapterBundle LoadAdapterBundle(const RunConfig& c) {
  return adapters::AdapterBundle(c.stage1.adapter, LoadStage(Stage1Checkpoint(c), "train-stage1"), true);
}

policy::ResidualPolicy LoadResidual(const RunConfig& c) {
  return {c.stage2.residual, LoadStage(Stage2Checkpoint(c), "train-stage2")};
}

policy::IdmModel LoadIdm(const RunConfig& c) {
  policy::IdmModel m;
  m.net = LoadStage(IdmCheckpoint(c), "idm-baseline");
  m.trained = true;
  return m;
}

ParameterRecord SaveParams(const std::filesystem::path& path, const ParameterRecord& record) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  SaveCheckpoint(path, record);
  return RoundToFloat32(record);
}

std::vector<chunkworld::Demonstration> LoadDemos(const RunConfig& c, std::size_t* dropped_steps) {
  return LoadForTraining(ReadDemos(c.paths.demos), static_cast<std::size_t>(c.env.chunk_size),
                         dropped_steps);
}

std::vector<adapters::Stage1Example> Stage1Examples(const std::vector<chunkworld::Demonstration>& demos,
                                                    const worldmodel::ImaginationEngine& engine) {
  std::vector<adapters::Stage1Example> out;
  out.reserve(demos.size());
  for (const auto& d : demos) {
    out.push_back({engine.EncodeTrajectory(d.states), d.actions, static_cast<int>(d.instruction.task)});
  }
  return out;
}

policy::ResidualPolicy FreshResidual(const RunConfig& c) {
  Rng rng(c.seed);
  return policy::ResidualPolicy::Initialize(c.stage2.residual, rng);
}

std::string_view PolicyKindName(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kBase: return "base";
    case PolicyKind::kRouted: return "routed";
    case PolicyKind::kRefined: return "refined";
  }
  return "unknown";
}

std::optional<PolicyKind> ParsePolicyKind(std::string_view name) {
  for (auto k : {PolicyKind::kBase, PolicyKind::kRouted, PolicyKind::kRefined}) {
    if (PolicyKindName(k) == name) return k;
  }
  return std::nullopt;
}

policy::ChunkFn MakeChunkFn(PolicyKind kind, const policy::BasePolicy& base,
                            const adapters::AdapterBundle* bundle,
                            const policy::ResidualPolicy* residual,
                            const chunkworld::EpisodeSpec& spec) {
  if (kind == PolicyKind::kBase) return policy::BaseChunkFn(base, spec);
  if (!bundle) throw ContractError("the " + std::string(PolicyKindName(kind)) + " policy needs adapters");
  if (kind == PolicyKind::kRouted) return policy::RoutedChunkFn(base, *bundle, spec);
  if (!residual) throw ContractError("the refined policy needs a residual");
  return policy::RefinedChunkFn(base, *residual, *bundle, spec);
}

SegmentationSummary SegmentRecords(const std::vector<DemoRecord>& records, const skillseg::SegConfig& cfg) {
  const auto schema = skillseg::SkillSchema::Default();
  SegmentationSummary out;
  std::vector<double> original;
  std::vector<double> segmented;
  int accepted = 0;
  for (const auto& r : records) {
    const skillseg::GripperTrace trace{r.w0, r.widths};
    const auto events = skillseg::ClassifyEvents(trace, cfg);
    const auto segments = skillseg::BuildSegments(events, cfg);
    SegmentedDemo d{r.demo_id, r.task, skillseg::AlignSchema(segments, schema, r.task, cfg)};
    original.push_back(static_cast<double>(r.actions.size()));
    if (d.alignment.accepted) {
      ++accepted;
      for (const auto& s : d.alignment.segments) {
        if (s.label != skillseg::kNoise) segmented.push_back(static_cast<double>(s.end - s.start + 1));
      }
    }
    out.demos.push_back(std::move(d));
  }
  out.sync_rate = records.empty() ? 0.0 : static_cast<double>(accepted) / records.size();
  if (!original.empty() && !segmented.empty()) out.lengths = skillseg::LengthStats(original, segmented);
  return out;
}

std::string SegmentsJsonl(const SegmentationSummary& summary) {
  std::string out;
  for (const auto& d : summary.demos) {
    if (!d.alignment.accepted) continue;
    for (const auto& s : d.alignment.segments) {
      if (s.label == skillseg::kNoise) continue;
      nlohmann::ordered_json j;
      j["demo_id"] = d.demo_id;
      j["task"] = d.task;
      j["label"] = s.label;
      j["start"] = s.start;
      j["end"] = s.end;
      out += j.dump() + "\n";
    }
  }
  return out;
}

std::string SegmentationReport(const SegmentationSummary& summary) {
  const auto& l = summary.lengths;
  std::string out = "demos " + std::to_string(summary.demos.size()) + "\n";
  out += "sync_rate " + FormatNumber(summary.sync_rate) + "\n";
  out += "original_mean " + FormatNumber(l.original.mean) + "\n";
  out += "original_median " + FormatNumber(l.original.median) + "\n";
  out += "original_near_median " + FormatNumber(l.original.near_median_fraction) + "\n";
  out += "segmented_mean " + FormatNumber(l.segmented.mean) + "\n";
  out += "segmented_median " + FormatNumber(l.segmented.median) + "\n";
  out += "segmented_near_median " + FormatNumber(l.segmented.near_median_fraction) + "\n";
  out += "density_ratio " + FormatNumber(l.density_ratio) + "\n";
  return out;
}

}  // namespace w2a::pipeline
