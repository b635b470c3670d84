// w2a: command-line driver for the toy world-to-action pipeline.
//
//   w2a gen-demos --n 200 --out demos.jsonl
//   w2a train-base --config run.json
//   w2a train-stage1 --config run.json
//   w2a train-stage2 --config run.json
//   w2a eval --config run.json --policy refined
//
// Failures print one line `error: <kind>: <message>` to stderr and exit 1.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "w2a/adapters/adapters.h"
#include "w2a/numerics/errors.h"
#include "w2a/pipeline/config.h"
#include "w2a/pipeline/demo_io.h"
#include "w2a/pipeline/metrics.h"
#include "w2a/pipeline/plot.h"
#include "w2a/pipeline/stages.h"

namespace {

using namespace w2a;
namespace fs = std::filesystem;

pipeline::RunConfig Config(const std::string& path) {
  if (!path.empty()) return pipeline::LoadRunConfig(path);
  pipeline::RunConfig c = pipeline::DefaultRunConfig();
  pipeline::ApplySeedOverride(c);
  return c;
}

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void WriteMetric(const pipeline::RunConfig& c, const std::string& name, const std::string& text) {
  EnsureDir(c.paths.metrics);
  pipeline::WriteTextFile(c.paths.metrics / name, text);
}

pipeline::PolicyKind PolicyArg(const std::string& name) {
  const auto kind = pipeline::ParsePolicyKind(name);
  if (!kind) throw ConfigError("unknown policy '" + name + "' (base, routed or refined)");
  return *kind;
}

std::vector<chunkworld::Demonstration> Demos(const pipeline::RunConfig& c) {
  std::size_t dropped = 0;
  auto demos = pipeline::LoadDemos(c, &dropped);
  if (dropped > 0) std::cerr << "truncated " << dropped << " trailing steps to whole chunks\n";
  if (demos.empty()) throw FormatError(c.paths.demos.string() + " holds no usable demos");
  return demos;
}

// Policy under evaluation plus the components it borrows.
struct LoadedPolicy {
  policy::BasePolicy base;
  std::optional<adapters::AdapterBundle> bundle;
  std::optional<policy::ResidualPolicy> residual;

  policy::ChunkFn Fn(pipeline::PolicyKind kind, const chunkworld::EpisodeSpec& spec) const {
    return pipeline::MakeChunkFn(kind, base, bundle ? &*bundle : nullptr, residual ? &*residual : nullptr,
                                 spec);
  }
};

LoadedPolicy LoadPolicy(const pipeline::RunConfig& c, pipeline::PolicyKind kind, bool fresh_residual) {
  LoadedPolicy p{pipeline::LoadBasePolicy(c), std::nullopt, std::nullopt};
  if (kind == pipeline::PolicyKind::kBase) return p;
  p.bundle = pipeline::LoadAdapterBundle(c);
  if (kind == pipeline::PolicyKind::kRefined) {
    p.residual = fresh_residual ? pipeline::FreshResidual(c) : pipeline::LoadResidual(c);
  }
  return p;
}

void RunGenDemos(const std::string& config_path, int n, const std::string& task, double sigma,
                 std::optional<std::uint64_t> seed, const std::string& out) {
  const auto c = Config(config_path);
  std::optional<chunkworld::TaskKind> kind;
  if (task != "all") {
    kind = chunkworld::ParseTask(task);
    if (!kind) throw ConfigError("unknown task '" + task + "'");
  }
  if (n < 0) throw ConfigError("--n must be non-negative");
  const fs::path path = out.empty() ? c.paths.demos : fs::path(out);
  const auto records = pipeline::GenerateDemos(static_cast<std::size_t>(n), kind, sigma,
                                               seed.value_or(c.seed), c.env);
  pipeline::WriteDemos(path, records);
  std::cout << "wrote " << records.size() << " demos to " << path.string() << "\n";
}

void RunTrainBase(const std::string& config_path) {
  const auto c = Config(config_path);
  const auto demos = Demos(c);
  const auto base = policy::BcTrain(demos, c.bc, c.env);
  pipeline::SaveParams(pipeline::BaseCheckpoint(c), base.net);
  std::cout << "base policy trained on " << (c.bc.demo_count ? std::min(c.bc.demo_count, demos.size())
                                                             : demos.size())
            << " demos -> " << pipeline::BaseCheckpoint(c).string() << "\n";
}

void RunTrainStage1(const std::string& config_path) {
  const auto c = Config(config_path);
  const worldmodel::ImaginationEngine engine({}, c.env);
  const auto examples = pipeline::Stage1Examples(Demos(c), engine);
  const auto result = adapters::Stage1Train(examples, c.stage1);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  const adapters::AdapterBundle saved(c.stage1.adapter,
                                      pipeline::SaveParams(pipeline::Stage1Checkpoint(c), result.bundle.params()),
                                      true);
  WriteMetric(c, "stage1.csv", pipeline::Stage1Csv(result.log));
  const auto held = adapters::EvaluateStage1(saved, examples, result.holdout_indices);
  std::cout << "stage1: " << result.holdout_indices.size() << " held-out demos, recon_mse "
            << pipeline::FormatNumber(held.recon_mse) << ", pos_sim " << pipeline::FormatNumber(held.pos_sim)
            << "\n";
}

void RunTrainStage2(const std::string& config_path) {
  const auto c = Config(config_path);
  const auto base = pipeline::LoadBasePolicy(c);
  const auto bundle = pipeline::LoadAdapterBundle(c);
  const worldmodel::ImaginationEngine engine(c.artifact, c.env);
  const auto result = policy::Stage2Train(base, pipeline::FreshResidual(c), bundle, engine, c.stage2);
  pipeline::SaveParams(pipeline::Stage2Checkpoint(c), result.residual.params);
  WriteMetric(c, "stage2.csv", pipeline::Stage2Csv(result.log));
  if (!result.log.empty()) {
    std::cout << "stage2: " << result.log.size() << " iterations, final pos_sim "
              << pipeline::FormatNumber(result.log.back().pos_sim) << "\n";
  }
  if (result.padded_chunks > 0) std::cerr << "padded " << result.padded_chunks << " finished chunks\n";
}

void RunEval(const std::string& config_path, const std::string& policy_name, bool fresh_residual) {
  const auto c = Config(config_path);
  const auto kind = PolicyArg(policy_name);
  const auto loaded = LoadPolicy(c, kind, fresh_residual);
  const auto instructions = policy::EvalInstructions(c.eval_episodes, c.eval_seed);
  const auto report = policy::Evaluate(loaded.Fn(kind, c.env), instructions, c.env);
  const std::string text = "policy " + std::string(pipeline::PolicyKindName(kind)) +
                           (fresh_residual && kind == pipeline::PolicyKind::kRefined ? " (fresh residual)" : "") +
                           "\n" + policy::FormatReport(report);
  WriteMetric(c, "eval_" + std::string(pipeline::PolicyKindName(kind)) + ".txt", text);
  std::cout << text;
}

void RunSegment(const std::string& config_path, const std::string& demos_path) {
  const auto c = Config(config_path);
  const auto records = pipeline::ReadDemos(demos_path.empty() ? c.paths.demos : fs::path(demos_path));
  const auto summary = pipeline::SegmentRecords(records);
  WriteMetric(c, "segments.jsonl", pipeline::SegmentsJsonl(summary));
  const std::string report = pipeline::SegmentationReport(summary);
  WriteMetric(c, "segment_report.txt", report);
  std::cout << report;
}

void RunIdmBaseline(const std::string& config_path) {
  const auto c = Config(config_path);
  const auto base = pipeline::LoadBasePolicy(c);
  const worldmodel::ImaginationEngine engine({}, c.env);
  auto idm = policy::IdmTrain(Demos(c), engine, c.idm);
  idm.net = pipeline::SaveParams(pipeline::IdmCheckpoint(c), idm.net);
  const auto report = policy::IdmBaseline(idm, base, engine, c.artifact, c.idm_baseline);
  pipeline::SaveParams(c.paths.checkpoints / "idm_clean_policy.ckpt", report.clean.policy.net);
  pipeline::SaveParams(c.paths.checkpoints / "idm_artifact_policy.ckpt", report.artifact.policy.net);
  const auto instructions = policy::EvalInstructions(c.eval_episodes, c.eval_seed);
  const auto clean = policy::Evaluate(policy::BaseChunkFn(report.clean.policy, c.env), instructions, c.env);
  const auto art = policy::Evaluate(policy::BaseChunkFn(report.artifact.policy, c.env), instructions, c.env);
  const std::string text = "idm_heldout_mse " + pipeline::FormatNumber(idm.heldout_mse) + "\nlabel_mse_clean " +
                           pipeline::FormatNumber(report.clean.label_mse) + "\nlabel_mse_artifact " +
                           pipeline::FormatNumber(report.artifact.label_mse) + "\nmse_ratio " +
                           pipeline::FormatNumber(report.mse_ratio) + "\nsuccess_clean " +
                           pipeline::FormatNumber(clean.rate()) + "\nsuccess_artifact " +
                           pipeline::FormatNumber(art.rate()) + "\n";
  WriteMetric(c, "idm_baseline.txt", text);
  std::cout << text;
}

void RunProbeMse(const std::string& config_path, const std::string& policy_name, const std::string& demos_path,
                 bool fresh_residual) {
  auto c = Config(config_path);
  if (!demos_path.empty()) c.paths.demos = demos_path;
  const auto kind = PolicyArg(policy_name);
  const auto loaded = LoadPolicy(c, kind, fresh_residual);
  const double mse = policy::ActionMseProbe(loaded.Fn(kind, c.env), Demos(c), c.env);
  std::printf("%.17g\n", mse);
}

void RunExportEmbeddings(const std::string& config_path, const std::string& out, int limit) {
  const auto c = Config(config_path);
  const auto bundle = pipeline::LoadAdapterBundle(c);
  const worldmodel::ImaginationEngine engine({}, c.env);
  auto demos = Demos(c);
  if (limit >= 0 && static_cast<std::size_t>(limit) < demos.size()) demos.resize(static_cast<std::size_t>(limit));
  const std::size_t dim = bundle.config().latent_dim;
  std::string csv = "demo,task,chunk,modality";
  for (std::size_t k = 0; k < dim; ++k) csv += ",z" + std::to_string(k);
  csv += '\n';
  for (std::size_t i = 0; i < demos.size(); ++i) {
    const auto& d = demos[i];
    const Tensor zv = adapters::EncodeVideo(bundle, engine.EncodeTrajectory(d.states));
    const Tensor za = adapters::EncodeActions(bundle, d.actions);
    for (const auto& [name, z] : {std::pair<const char*, const Tensor*>{"video", &zv}, {"action", &za}}) {
      for (std::size_t t = 0; t < z->rows(); ++t) {
        csv += std::to_string(i) + ',' + std::string(chunkworld::TaskName(d.instruction.task)) + ',' +
               std::to_string(t) + ',' + name;
        for (std::size_t k = 0; k < dim; ++k) csv += ',' + pipeline::FormatNumber(z->at(t, k));
        csv += '\n';
      }
    }
  }
  if (out.empty()) {
    WriteMetric(c, "embeddings.csv", csv);
  } else {
    pipeline::WriteTextFile(out, csv);
  }
}

void RunPlot(const std::string& metrics, const std::string& out) {
  const auto table = pipeline::ParseMetricCsv(pipeline::ReadTextFile(metrics));
  pipeline::WriteTextFile(out, pipeline::RenderSvg(table));
}

void RunConfigDump(const std::string& config_path, const std::string& out) {
  const auto text = pipeline::SerializeConfig(Config(config_path));
  if (out.empty()) {
    std::cout << text;
  } else {
    pipeline::WriteTextFile(out, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"w2a: world-to-action alignment on a toy manipulation world"};
  app.require_subcommand(1);

  std::string config;
  auto add_config = [&config](CLI::App* sub) {
    sub->add_option("--config", config, "run configuration (JSON); defaults apply when omitted");
  };

  int n = 200;
  std::string task = "all";
  double sigma = 0.0;
  std::optional<std::uint64_t> seed;
  std::string out;
  auto* gen = app.add_subcommand("gen-demos", "generate expert demonstrations as JSONL");
  add_config(gen);
  gen->add_option("--n", n, "number of demos")->capture_default_str();
  gen->add_option("--task", task, "reach, pick, place, pick_and_place or all")->capture_default_str();
  gen->add_option("--sigma", sigma, "Gaussian action jitter")->capture_default_str();
  gen->add_option("--seed", seed, "overrides the config seed");
  gen->add_option("--out", out, "output path; defaults to paths.demos");

  auto* train_base = app.add_subcommand("train-base", "behavior-clone the base policy");
  add_config(train_base);
  auto* stage1 = app.add_subcommand("train-stage1", "align video and action latents");
  add_config(stage1);
  auto* stage2 = app.add_subcommand("train-stage2", "train the residual policy against imagined rollouts");
  add_config(stage2);

  std::string policy_name = "refined";
  bool fresh = false;
  auto* eval = app.add_subcommand("eval", "closed-loop success rate");
  add_config(eval);
  eval->add_option("--policy", policy_name, "base, routed or refined")->capture_default_str();
  eval->add_flag("--fresh-residual", fresh, "use an untrained residual instead of the stage-2 checkpoint");

  std::string demos_path;
  auto* segment = app.add_subcommand("segment", "atomic-skill segmentation of demo gripper traces");
  add_config(segment);
  segment->add_option("--demos", demos_path, "demo JSONL; defaults to paths.demos");

  auto* idm = app.add_subcommand("idm-baseline", "inverse-dynamics pseudo-labeling baseline");
  add_config(idm);

  auto* probe = app.add_subcommand("probe-mse", "action MSE of a policy against demo chunks");
  add_config(probe);
  probe->add_option("--policy", policy_name, "base, routed or refined")->capture_default_str();
  probe->add_option("--demos", demos_path, "demo JSONL; defaults to paths.demos");
  probe->add_flag("--fresh-residual", fresh, "use an untrained residual");

  int limit = -1;
  auto* embed = app.add_subcommand("export-embeddings", "write video and action latents as CSV");
  add_config(embed);
  embed->add_option("--out", out, "output path; defaults to <metrics>/embeddings.csv");
  embed->add_option("--limit", limit, "export only the first N demos");

  std::string metrics;
  auto* plot = app.add_subcommand("plot", "render a metric CSV as SVG");
  plot->add_option("--metrics", metrics, "metric CSV")->required();
  plot->add_option("--out", out, "SVG path")->required();

  auto* dump = app.add_subcommand("config", "print the effective configuration");
  add_config(dump);
  dump->add_option("--out", out, "write to this path instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) RunGenDemos(config, n, task, sigma, seed, out);
    else if (train_base->parsed()) RunTrainBase(config);
    else if (stage1->parsed()) RunTrainStage1(config);
    else if (stage2->parsed()) RunTrainStage2(config);
    else if (eval->parsed()) RunEval(config, policy_name, fresh);
    else if (segment->parsed()) RunSegment(config, demos_path);
    else if (idm->parsed()) RunIdmBaseline(config);
    else if (probe->parsed()) RunProbeMse(config, policy_name, demos_path, fresh);
    else if (embed->parsed()) RunExportEmbeddings(config, out, limit);
    else if (plot->parsed()) RunPlot(metrics, out);
    else if (dump->parsed()) RunConfigDump(config, out);
  } catch (const w2a::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
