#include "w2a/policy/base_policy.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "w2a/numerics/adam.h"
#include "w2a/numerics/errors.h"
#include "w2a/numerics/layers.h"
#include "w2a/numerics/ops.h"

namespace w2a::policy {
namespace {

using chunkworld::Instruction;
using chunkworld::SimState;

layers::MlpSpec BaseSpec(std::size_t chunk_width) {
  return {{kPolicyInput, 128, 128, chunk_width}, layers::Activation::kGelu};
}

}  // namespace

std::array<double, kStateFeatures> StateFeatures(const SimState& s, const chunkworld::EpisodeSpec& spec) {
  const double phase = std::numbers::pi * s.step_index / static_cast<double>(spec.horizon());
  return {2.0 * s.gripper.x - 1.0,
          2.0 * s.gripper.y - 1.0,
          2.0 * s.aperture / chunkworld::kOpenWidth - 1.0,
          2.0 * s.object.x - 1.0,
          2.0 * s.object.y - 1.0,
          s.attached ? 1.0 : -1.0,
          std::sin(phase),
          std::cos(phase)};
}

std::array<double, kInstructionFeatures> InstructionFeatures(const Instruction& ins) {
  std::array<double, kInstructionFeatures> f = ins.Encoded();
  for (std::size_t i = 4; i < kInstructionFeatures; ++i) f[i] = 2.0 * f[i] - 1.0;
  return f;
}

Tensor PolicyInputs(const std::vector<SimState>& states, const std::vector<Instruction>& instructions,
                    const chunkworld::EpisodeSpec& spec) {
  if (states.size() != instructions.size() || states.empty()) {
    throw DimensionError("policy inputs need one instruction per state");
  }
  Tensor out({states.size(), kPolicyInput});
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto s = StateFeatures(states[i], spec);
    const auto l = InstructionFeatures(instructions[i]);
    std::copy(s.begin(), s.end(), out.data() + i * kPolicyInput);
    std::copy(l.begin(), l.end(), out.data() + i * kPolicyInput + kStateFeatures);
  }
  return out;
}

BasePolicy BasePolicy::Initialize(Rng& rng, std::size_t chunk_width) {
  BasePolicy p;
  Rng init = rng.Split("base_policy");
  layers::InitMlp(p.net, "pi", BaseSpec(chunk_width), init);
  return p;
}

std::size_t BasePolicy::chunk_width() const { return net.Get("pi.2.b").size(); }

Var BaseForward(Graph& g, const BasePolicy& policy, Var inputs) {
  return layers::ApplyMlp(g, policy.net, "pi", BaseSpec(policy.chunk_width()), inputs);
}

Tensor BaseChunks(const BasePolicy& policy, const Tensor& inputs) {
  Graph g(false);
  return BaseForward(g, policy, g.Constant(inputs)).value();
}

std::vector<ChunkSample> ChunkSamples(const std::vector<chunkworld::Demonstration>& demos,
                                      const chunkworld::EpisodeSpec& spec, std::size_t stride) {
  const std::size_t m = static_cast<std::size_t>(spec.chunk_size);
  if (stride == 0) stride = m;
  std::vector<ChunkSample> out;
  for (const auto& d : demos) {
    for (std::size_t t = 0; t + m <= d.actions.size(); t += stride) {
      ChunkSample sample;
      const Tensor in = PolicyInputs({d.states[t]}, {d.instruction}, spec);
      std::copy(in.values().begin(), in.values().end(), sample.input.begin());
      for (std::size_t j = 0; j < m; ++j)
        for (int k = 0; k < chunkworld::kActionDim; ++k)
          sample.target.push_back(d.actions[t + j][k] / chunkworld::kActionBounds[k]);
      out.push_back(std::move(sample));
    }
  }
  return out;
}

void RegressChunks(BasePolicy& policy, const std::vector<ChunkSample>& samples, int steps,
                   std::size_t batch_size, double lr, Rng& rng) {
  if (policy.frozen) throw FrozenError("base policy is frozen");
  if (samples.empty()) throw ContractError("no regression samples");
  const std::size_t width = samples.front().target.size();
  const std::size_t b = std::min(batch_size, samples.size());
  AdamState adam = MakeAdam(lr);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();
  for (int step = 0; step < steps; ++step) {
    Tensor in({b, kPolicyInput}), target({b, width});
    for (std::size_t r = 0; r < b; ++r) {
      if (cursor == order.size()) {
        Shuffle(order, rng);
        cursor = 0;
      }
      const ChunkSample& s = samples[order[cursor++]];
      std::copy(s.input.begin(), s.input.end(), in.data() + r * kPolicyInput);
      std::copy(s.target.begin(), s.target.end(), target.data() + r * width);
    }
    Graph g;
    Var loss = ops::MeanSquaredError(BaseForward(g, policy, g.Constant(std::move(in))),
                                     g.Constant(std::move(target)));
    AdamStep(policy.net, g.Backward(loss), adam);
  }
}

BasePolicy BcTrain(const std::vector<chunkworld::Demonstration>& demos, const BcConfig& cfg,
                   const chunkworld::EpisodeSpec& spec) {
  if (demos.empty()) throw ContractError("behavior cloning needs at least one demo");
  if (cfg.epochs < 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0) || cfg.label_noise < 0.0) {
    throw ConfigError("invalid behavior-cloning configuration");
  }
  Rng root = Rng(cfg.seed).Split("bc");
  const std::size_t keep = cfg.demo_count ? std::min(cfg.demo_count, demos.size()) : demos.size();
  std::vector<chunkworld::Demonstration> used(demos.begin(),
                                              demos.begin() + static_cast<std::ptrdiff_t>(keep));
  std::vector<ChunkSample> samples = ChunkSamples(used, spec, cfg.stride);
  if (cfg.label_noise > 0.0) {
    Rng noise = root.Split("label_noise");
    for (ChunkSample& s : samples) {
      for (std::size_t i = 0; i < s.target.size(); ++i) {
        s.target[i] += noise.Normal(0.0, cfg.label_noise) / chunkworld::kActionBounds[i % 3];
      }
    }
  }
  Rng init = root.Split("init");
  BasePolicy policy = BasePolicy::Initialize(init, samples.front().target.size());
  const std::size_t per_epoch = (samples.size() + cfg.batch_size - 1) / cfg.batch_size;
  Rng order = root.Split("order");
  RegressChunks(policy, samples, cfg.epochs * static_cast<int>(per_epoch), cfg.batch_size, cfg.lr,
                order);
  policy.frozen = true;
  return policy;
}

ChunkFn BaseChunkFn(const BasePolicy& policy, const chunkworld::EpisodeSpec& spec) {
  return [&policy, spec](const std::vector<SimState>& s, const std::vector<Instruction>& l) {
    return BaseChunks(policy, PolicyInputs(s, l, spec));
  };
}

std::vector<Episode> RunEpisodes(const ChunkFn& fn, const std::vector<Instruction>& instructions,
                                 const chunkworld::EpisodeSpec& spec, bool stop_on_success) {
  const std::size_t n = instructions.size();
  const std::size_t m = static_cast<std::size_t>(spec.chunk_size);
  std::vector<Episode> episodes(n);
  std::vector<SimState> current(n);
  std::vector<bool> done(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    current[i] = chunkworld::InitialState(instructions[i], spec);
    episodes[i].states.push_back(current[i]);
  }
  for (int t = 0; t < spec.chunk_count; ++t) {
    std::vector<std::size_t> active;
    std::vector<SimState> s;
    std::vector<Instruction> l;
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) continue;
      active.push_back(i);
      s.push_back(current[i]);
      l.push_back(instructions[i]);
    }
    if (active.empty()) break;
    const Tensor chunks = fn(s, l);
    const std::size_t width = chunks.cols();
    if (chunks.rows() != active.size() || width != m * chunkworld::kActionDim) {
      throw DimensionError("policy returned " + ShapeToString(chunks.shape()) + " for " +
                           std::to_string(active.size()) + " states");
    }
    for (std::size_t r = 0; r < active.size(); ++r) {
      const std::size_t i = active[r];
      for (std::size_t j = 0; j < m; ++j) {
        chunkworld::ActionVec a;
        for (int k = 0; k < chunkworld::kActionDim; ++k) {
          a[k] = std::clamp(chunks[r * width + j * 3 + k], -1.0, 1.0) * chunkworld::kActionBounds[k];
        }
        current[i] = chunkworld::Step(current[i], a, spec);
        episodes[i].states.push_back(current[i]);
        if (chunkworld::Success(current[i], instructions[i], spec)) {
          episodes[i].success = true;
          if (stop_on_success) {
            done[i] = true;
            break;
          }
        }
      }
    }
  }
  return episodes;
}

std::vector<Instruction> EvalInstructions(int count, std::uint64_t seed) {
  Rng root = Rng(seed).Split("eval_instructions");
  std::vector<Instruction> out;
  for (int i = 0; i < count; ++i) {
    Rng r = root.Split(static_cast<std::uint64_t>(i));
    out.push_back(chunkworld::SampleInstruction(chunkworld::kAllTasks[i % chunkworld::kTaskCount], r));
  }
  return out;
}

EvalReport Evaluate(const ChunkFn& fn, const std::vector<Instruction>& instructions,
                    const chunkworld::EpisodeSpec& spec) {
  const std::vector<Episode> episodes = RunEpisodes(fn, instructions, spec, true);
  EvalReport report;
  for (const auto t : chunkworld::kAllTasks) report.per_task[std::string(chunkworld::TaskName(t))];
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    auto& [ok, total] = report.per_task[std::string(chunkworld::TaskName(instructions[i].task))];
    ++total;
    ++report.episodes;
    if (episodes[i].success) {
      ++ok;
      ++report.successes;
    }
  }
  return report;
}

std::string FormatReport(const EvalReport& report) {
  std::ostringstream out;
  out << "episodes " << report.episodes << "\nsuccesses " << report.successes << "\nsuccess_rate "
      << report.rate() << "\n";
  for (const auto& [task, counts] : report.per_task) {
    out << "task " << task << " " << counts.first << "/" << counts.second << "\n";
  }
  return out.str();
}

double ActionMseProbe(const ChunkFn& fn, const std::vector<chunkworld::Demonstration>& demos,
                      const chunkworld::EpisodeSpec& spec) {
  std::vector<SimState> states;
  std::vector<Instruction> instructions;
  std::vector<double> expert;
  const std::size_t m = static_cast<std::size_t>(spec.chunk_size);
  for (const auto& d : demos) {
    for (std::size_t t = 0; t + m <= d.actions.size(); t += m) {
      states.push_back(d.states[t]);
      instructions.push_back(d.instruction);
      for (std::size_t j = 0; j < m; ++j)
        for (int k = 0; k < chunkworld::kActionDim; ++k)
          expert.push_back(d.actions[t + j][k] / chunkworld::kActionBounds[k]);
    }
  }
  if (states.empty()) throw ContractError("no chunks to probe");
  const Tensor got = fn(states, instructions);
  if (got.size() != expert.size()) throw DimensionError("probe chunk width mismatch");
  double se = 0.0;
  for (std::size_t i = 0; i < expert.size(); ++i) {
    const double d = std::clamp(got[i], -1.0, 1.0) - expert[i];
    se += d * d;
  }
  return se / static_cast<double>(expert.size());
}

}  // namespace w2a::policy
