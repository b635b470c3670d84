#include "w2a/policy/idm.h"

#include <algorithm>

#include "w2a/adapters/adapters.h"
#include "w2a/numerics/adam.h"
#include "w2a/numerics/errors.h"
#include "w2a/numerics/layers.h"
#include "w2a/numerics/ops.h"

namespace w2a::policy {
namespace {

using chunkworld::Instruction;
using worldmodel::VideoLatentChunk;

constexpr std::size_t kChunkWidth = 12;

layers::MlpSpec IdmSpec(std::size_t hidden) {
  return {{2 * worldmodel::kLatentSize, hidden, hidden, kChunkWidth}, layers::Activation::kGelu};
}

std::size_t Hidden(const IdmModel& m) { return m.net.Get("idm.0.b").size(); }

struct Pairs {
  Tensor inputs;   // [N, 288]
  Tensor targets;  // [N, 12]
};

Pairs DemoPairs(const std::vector<chunkworld::Demonstration>& demos,
                const std::vector<std::size_t>& indices, const worldmodel::ImaginationEngine& engine) {
  std::vector<double> in, out;
  for (std::size_t i : indices) {
    const auto& d = demos[i];
    const auto latents = engine.EncodeTrajectory(d.states);
    const Tensor x = IdmInputs(engine.EncodeStill(d.states.front()), latents);
    const Tensor y = adapters::ActionsToChunks(d.actions, static_cast<std::size_t>(engine.spec().chunk_size));
    in.insert(in.end(), x.values().begin(), x.values().end());
    out.insert(out.end(), y.values().begin(), y.values().end());
  }
  const std::size_t n = out.size() / kChunkWidth;
  return {Tensor({n, 2 * worldmodel::kLatentSize}, std::move(in)), Tensor({n, kChunkWidth}, std::move(out))};
}

double ClippedMse(const Tensor& prediction, const Tensor& target) {
  double se = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = std::clamp(prediction[i], -1.0, 1.0) - target[i];
    se += d * d;
  }
  return se / static_cast<double>(target.size());
}

}  // namespace

Tensor IdmInputs(const VideoLatentChunk& first_prev, std::span<const VideoLatentChunk> latents) {
  const std::size_t k = worldmodel::kLatentSize;
  if (latents.empty()) throw ContractError("no latents to label");
  Tensor out({latents.size(), 2 * k});
  for (std::size_t t = 0; t < latents.size(); ++t) {
    const VideoLatentChunk& prev = t == 0 ? first_prev : latents[t - 1];
    if (prev.size() != k || latents[t].size() != k) {
      throw DimensionError("IDM expects latents of " + std::to_string(k) + " values");
    }
    std::copy(prev.values().begin(), prev.values().end(), out.data() + t * 2 * k);
    std::copy(latents[t].values().begin(), latents[t].values().end(), out.data() + t * 2 * k + k);
  }
  return out;
}

Var IdmForward(Graph& g, const IdmModel& model, Var inputs) {
  return layers::ApplyMlp(g, model.net, "idm", IdmSpec(Hidden(model)), inputs);
}

IdmModel IdmTrain(const std::vector<chunkworld::Demonstration>& demos,
                  const worldmodel::ImaginationEngine& engine, const IdmConfig& cfg) {
  if (demos.size() < 2) throw ContractError("IDM training needs at least two demos");
  if (cfg.steps < 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0)) {
    throw ConfigError("invalid IDM configuration");
  }
  Rng root = Rng(cfg.seed).Split("idm");
  std::vector<std::size_t> train, holdout;
  adapters::SplitHoldout(demos.size(), 0.1, cfg.seed, train, holdout);
  const Pairs tr = DemoPairs(demos, train, engine);
  const Pairs ho = DemoPairs(demos, holdout, engine);

  IdmModel model;
  Rng init = root.Split("init");
  layers::InitMlp(model.net, "idm", IdmSpec(cfg.hidden), init);
  Rng order_rng = root.Split("order");
  AdamState adam = MakeAdam(cfg.lr);
  const std::size_t n = tr.targets.rows(), in_w = tr.inputs.cols();
  const std::size_t b = std::min(cfg.batch_size, n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::size_t cursor = n;
  for (int step = 0; step < cfg.steps; ++step) {
    Tensor x({b, in_w}), y({b, kChunkWidth});
    for (std::size_t r = 0; r < b; ++r) {
      if (cursor == n) {
        Shuffle(order, order_rng);
        cursor = 0;
      }
      const std::size_t i = order[cursor++];
      std::copy_n(tr.inputs.data() + i * in_w, in_w, x.data() + r * in_w);
      std::copy_n(tr.targets.data() + i * kChunkWidth, kChunkWidth, y.data() + r * kChunkWidth);
    }
    Graph g;
    Var loss = ops::MeanSquaredError(IdmForward(g, model, g.Constant(std::move(x))),
                                     g.Constant(std::move(y)));
    AdamStep(model.net, g.Backward(loss), adam);
  }
  Graph g(false);
  model.heldout_mse = ClippedMse(IdmForward(g, model, g.Constant(ho.inputs)).value(), ho.targets);
  model.trained = true;
  return model;
}

Tensor IdmPredict(const IdmModel& model, const VideoLatentChunk& first_prev,
                  std::span<const VideoLatentChunk> latents) {
  if (!model.trained) throw ContractError("IDM has not been trained");
  Graph g(false);
  return IdmForward(g, model, g.Constant(IdmInputs(first_prev, latents))).value();
}

IdmBaselineReport IdmBaseline(const IdmModel& idm, const BasePolicy& base,
                              const worldmodel::ImaginationEngine& engine,
                              const worldmodel::ArtifactConfig& artifact,
                              const IdmBaselineConfig& cfg) {
  if (!idm.trained) throw ContractError("IDM has not been trained");
  if (cfg.instructions < 1) throw ConfigError("IDM baseline needs at least one instruction");
  const chunkworld::EpisodeSpec& spec = engine.spec();
  const std::size_t m = static_cast<std::size_t>(spec.chunk_size);
  Rng root = Rng(cfg.seed).Split("idm_baseline");
  Rng sampler = root.Split("instructions");
  std::vector<Instruction> instructions;
  for (int i = 0; i < cfg.instructions; ++i) {
    Rng r = sampler.Split(static_cast<std::uint64_t>(i));
    instructions.push_back(chunkworld::SampleInstruction(chunkworld::kAllTasks[i % chunkworld::kTaskCount], r));
  }

  auto run_source = [&](const worldmodel::ImaginationEngine& source, const char* name) {
    Rng noise = root.Split(name);
    std::vector<ChunkSample> samples;
    double se = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < instructions.size(); ++i) {
      Rng stream = noise.Split(static_cast<std::uint64_t>(i));
      const auto s1 = chunkworld::InitialState(instructions[i], spec);
      const auto rollout = source.Imagine(s1, instructions[i], spec.chunk_count, &stream);
      const Tensor labels = IdmPredict(idm, source.EncodeStill(s1), rollout.latents);
      const Tensor truth = adapters::ActionsToChunks(rollout.expert_actions, m);
      for (std::size_t k = 0; k < truth.size(); ++k) {
        const double d = std::clamp(labels[k], -1.0, 1.0) - truth[k];
        se += d * d;
      }
      count += truth.size();
      for (std::size_t t = 0; t < labels.rows(); ++t) {
        ChunkSample s;
        const Tensor in = PolicyInputs({rollout.states[t * m]}, {instructions[i]}, spec);
        std::copy(in.values().begin(), in.values().end(), s.input.begin());
        for (std::size_t k = 0; k < labels.cols(); ++k) {
          s.target.push_back(std::clamp(labels.at(t, k), -1.0, 1.0));
        }
        samples.push_back(std::move(s));
      }
    }
    IdmSourceReport report{se / static_cast<double>(count), base.Thawed()};
    Rng order = root.Split(std::string(name) + "/order");
    RegressChunks(report.policy, samples, cfg.finetune_steps, cfg.batch_size, cfg.lr, order);
    report.policy.frozen = true;
    return report;
  };

  worldmodel::ArtifactConfig none;
  IdmBaselineReport out{run_source(engine.WithArtifact(none), "clean"),
                        run_source(engine.WithArtifact(artifact), "artifact"), 0.0};
  out.mse_ratio = out.artifact.label_mse / out.clean.label_mse;
  return out;
}

}  // namespace w2a::policy
