#include "w2a/adapters/adapters.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "w2a/numerics/errors.h"
#include "w2a/numerics/layers.h"
#include "w2a/numerics/ops.h"

namespace w2a::adapters {
namespace {

using chunkworld::ActionVec;
using worldmodel::VideoLatentChunk;

layers::MlpSpec EncoderSpec(const AdapterConfig& c) {
  return {{c.chunk_width(), 128, 64, c.latent_dim}, layers::Activation::kGelu};
}

layers::MlpSpec DecoderSpec(const AdapterConfig& c) {
  return {{c.latent_dim, 64, 128, c.chunk_width()}, layers::Activation::kGelu};
}

ops::ConvGeometry FirstConv(const AdapterConfig& c, std::size_t n) {
  return {n, c.grid_height, c.grid_width, c.grid_channels, 3, 2, 1};
}

ops::ConvGeometry SecondConv(const AdapterConfig& c, std::size_t n) {
  const ops::ConvGeometry first = FirstConv(c, n);
  return {n, first.out_height(), first.out_width(), c.conv1_channels, 3, 2, 1};
}

Var ConvBlock(Graph& g, const ParameterRecord& p, const std::string& conv, const std::string& norm,
              Var x, const ops::ConvGeometry& geom, std::size_t groups) {
  Var cols = ops::Im2Col(x, geom);
  Var y = layers::ApplyLinear(g, p, conv, cols);
  y = ops::GroupNorm(y, geom.out_height() * geom.out_width(), groups);
  y = ops::MulRow(y, g.Param(p, norm + ".gamma"));
  y = ops::AddRow(y, g.Param(p, norm + ".beta"));
  return ops::Gelu(y);
}

// Mean over the [B*T, D] rows of per-pair chunk similarity.
double MeanChunkSimilarity(const Tensor& zv, const Tensor& za, std::size_t batch) {
  const std::size_t t = zv.rows() / batch, d = zv.cols();
  double sum = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor v({t, d}, std::vector<double>(zv.data() + b * t * d, zv.data() + (b + 1) * t * d));
    Tensor a({t, d}, std::vector<double>(za.data() + b * t * d, za.data() + (b + 1) * t * d));
    sum += align::ChunkSimilarity(v, a);
  }
  return sum / static_cast<double>(batch);
}

Tensor StackRows(const std::vector<const Tensor*>& parts) {
  std::size_t rows = 0;
  for (const Tensor* p : parts) rows += p->rows();
  std::vector<double> data;
  data.reserve(rows * parts.front()->cols());
  for (const Tensor* p : parts) data.insert(data.end(), p->values().begin(), p->values().end());
  return Tensor({rows, parts.front()->cols()}, std::move(data));
}

}  // namespace

AdapterBundle::AdapterBundle(AdapterConfig config, ParameterRecord params, bool frozen)
    : config_(config), params_(std::move(params)), frozen_(frozen) {}

AdapterBundle AdapterBundle::Initialize(const AdapterConfig& c, Rng& rng) {
  ParameterRecord p;
  Rng video = rng.Split("video_adapter");
  layers::InitLinear(p, "bv.conv1", 9 * c.grid_channels, c.conv1_channels, video);
  layers::InitLayerNorm(p, "bv.norm1", c.conv1_channels);
  layers::InitLinear(p, "bv.conv2", 9 * c.conv1_channels, c.conv2_channels, video);
  layers::InitLayerNorm(p, "bv.norm2", c.conv2_channels);
  layers::InitLinear(p, "bv.fc", c.conv2_channels, c.latent_dim, video);
  Rng action = rng.Split("action_adapter");
  layers::InitMlp(p, "ba", EncoderSpec(c), action);
  // Idle chunks are exactly zero; a nonzero first bias keeps their
  // embedding away from the origin.
  p.Set("ba.0.b", UniformInit({EncoderSpec(c).sizes[1]}, 0.1, action));
  Rng decoder = rng.Split("action_decoder");
  layers::InitMlp(p, "da", DecoderSpec(c), decoder);
  return AdapterBundle(c, std::move(p), false);
}

void AdapterBundle::AdamUpdate(const ParameterRecord& grads, AdamState& state) {
  if (frozen_) throw FrozenError("adapter bundle is frozen");
  AdamStep(params_, grads, state);
}

Var VideoAdapterForward(Graph& g, const AdapterBundle& bundle, Var grid_rows, std::size_t n) {
  const AdapterConfig& c = bundle.config();
  const ParameterRecord& p = bundle.params();
  const Shape expected{n * c.grid_height * c.grid_width, c.grid_channels};
  if (grid_rows.shape() != expected) {
    throw ConfigError("video adapter expects grid rows " + ShapeToString(expected) + ", got " +
                      ShapeToString(grid_rows.shape()));
  }
  const ops::ConvGeometry g1 = FirstConv(c, n), g2 = SecondConv(c, n);
  Var x = ConvBlock(g, p, "bv.conv1", "bv.norm1", grid_rows, g1, c.norm_groups);
  x = ConvBlock(g, p, "bv.conv2", "bv.norm2", x, g2, c.norm_groups);
  x = ops::SegmentMean(x, g2.out_height() * g2.out_width());
  return layers::ApplyLinear(g, p, "bv.fc", x);
}

Var ActionAdapterForward(Graph& g, const AdapterBundle& bundle, Var chunks) {
  return layers::ApplyMlp(g, bundle.params(), "ba", EncoderSpec(bundle.config()), chunks);
}

Var DecoderForward(Graph& g, const AdapterBundle& bundle, Var z) {
  return layers::ApplyMlp(g, bundle.params(), "da", DecoderSpec(bundle.config()), ops::NormalizeRows(z));
}

Tensor GridsToRows(std::span<const VideoLatentChunk> grids, const AdapterConfig& c) {
  if (grids.empty()) throw ConfigError("empty video latent sequence");
  const Shape expected{c.grid_channels, c.grid_height, c.grid_width};
  const std::size_t hw = c.grid_height * c.grid_width, ch = c.grid_channels;
  Tensor out({grids.size() * hw, ch});
  for (std::size_t i = 0; i < grids.size(); ++i) {
    if (grids[i].shape() != expected) {
      throw ConfigError("video latent shape " + ShapeToString(grids[i].shape()) +
                        " does not match " + ShapeToString(expected));
    }
    for (std::size_t k = 0; k < ch; ++k)
      for (std::size_t pos = 0; pos < hw; ++pos) out[(i * hw + pos) * ch + k] = grids[i][k * hw + pos];
  }
  return out;
}

Tensor ActionsToChunks(std::span<const ActionVec> actions, std::size_t chunk_size) {
  if (actions.empty() || chunk_size == 0 || actions.size() % chunk_size != 0) {
    throw ChunkingError("action sequence of length " + std::to_string(actions.size()) +
                        " is not a positive multiple of " + std::to_string(chunk_size));
  }
  const std::size_t a = chunkworld::kActionDim;
  Tensor out({actions.size() / chunk_size, chunk_size * a});
  for (std::size_t i = 0; i < actions.size(); ++i)
    for (std::size_t k = 0; k < a; ++k) out[i * a + k] = actions[i][k] / chunkworld::kActionBounds[k];
  return out;
}

std::vector<ActionVec> ChunksToActions(const Tensor& chunks) {
  const std::size_t a = chunkworld::kActionDim;
  if (chunks.size() % a != 0) {
    throw DimensionError("chunk tensor " + ShapeToString(chunks.shape()) +
                         " is not a whole number of actions");
  }
  std::vector<ActionVec> out(chunks.size() / a);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < a; ++k) {
      const double v = std::clamp(chunks[i * a + k], -1.0, 1.0);
      out[i][k] = v * chunkworld::kActionBounds[k];
    }
  }
  return out;
}

Tensor EncodeVideo(const AdapterBundle& bundle, std::span<const VideoLatentChunk> video) {
  Graph g(false);
  Var rows = g.Constant(GridsToRows(video, bundle.config()));
  return VideoAdapterForward(g, bundle, rows, video.size()).value();
}

Tensor EncodeActions(const AdapterBundle& bundle, std::span<const ActionVec> actions) {
  Graph g(false);
  Var chunks = g.Constant(ActionsToChunks(actions, bundle.config().chunk_size));
  return ActionAdapterForward(g, bundle, chunks).value();
}

std::vector<ActionVec> DecodeActions(const AdapterBundle& bundle, const Tensor& z) {
  if (z.rank() > 2 || z.cols() != bundle.config().latent_dim) {
    throw DimensionError("latent trajectory " + ShapeToString(z.shape()) + " is not [T, " +
                         std::to_string(bundle.config().latent_dim) + "]");
  }
  Graph g(false);
  Var zv = g.Constant(z.rank() == 1 ? z.Reshaped({1, z.size()}) : z);
  return ChunksToActions(DecoderForward(g, bundle, zv).value());
}

Stage1Loss BuildStage1Loss(Graph& g, const AdapterBundle& bundle, const Tensor& grid_rows,
                           const Tensor& chunks, std::size_t batch, const align::ContrastiveConfig& cfg) {
  const AdapterConfig& ac = bundle.config();
  Var video = g.Constant(grid_rows);
  Var target = g.Constant(chunks);
  Stage1Loss out;
  out.zv = VideoAdapterForward(g, bundle, video, grid_rows.rows() / (ac.grid_height * ac.grid_width));
  out.za = ActionAdapterForward(g, bundle, target);
  out.recon = ops::MeanSquaredError(DecoderForward(g, bundle, out.za), target);
  out.contrastive = align::ContrastiveLoss(out.zv, out.za, batch, cfg);
  out.total = ops::Add(out.recon, out.contrastive);
  return out;
}

void Stage1Config::Validate() const {
  if (batch_size < 2) throw ConfigError("stage-1 batch size must be at least 2");
  if (!(hard_negative_ratio >= 0.0 && hard_negative_ratio <= 1.0)) {
    throw ConfigError("hard_negative_ratio must lie in [0, 1]");
  }
  if (steps < 0) throw ConfigError("stage-1 steps must be non-negative");
  if (!(lr > 0.0)) throw ConfigError("stage-1 learning rate must be positive");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw ConfigError("holdout_fraction must lie in [0, 1)");
  }
  contrastive.Validate();
}

void SplitHoldout(std::size_t n, double fraction, std::uint64_t seed,
                  std::vector<std::size_t>& train, std::vector<std::size_t>& holdout) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng(seed).Split("holdout");
  Shuffle(order, rng);
  std::size_t held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (fraction > 0.0 && n >= 2) held = std::clamp<std::size_t>(held, 1, n - 1);
  holdout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
  train.assign(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
  std::sort(holdout.begin(), holdout.end());
  std::sort(train.begin(), train.end());
}

std::vector<std::size_t> SampleBatch(std::size_t anchor, const std::vector<std::size_t>& pool,
                                     const std::vector<int>& tasks, std::size_t batch_size,
                                     double hard_negative_ratio, Rng& rng) {
  if (pool.size() < batch_size) {
    throw ConfigError("need at least " + std::to_string(batch_size) + " training demos, have " +
                      std::to_string(pool.size()));
  }
  std::vector<std::size_t> same, other;
  for (std::size_t i : pool) {
    if (i == anchor) continue;
    (tasks[i] == tasks[anchor] ? same : other).push_back(i);
  }
  Shuffle(same, rng);
  Shuffle(other, rng);
  const std::size_t negatives = batch_size - 1;
  const auto hard_target = static_cast<std::size_t>(
      std::ceil(hard_negative_ratio * static_cast<double>(negatives) - 1e-12));
  std::size_t hard = std::min(hard_target, same.size());
  std::size_t easy = std::min(negatives - hard, other.size());
  hard = std::min(negatives - easy, same.size());
  std::vector<std::size_t> batch{anchor};
  batch.insert(batch.end(), same.begin(), same.begin() + static_cast<std::ptrdiff_t>(hard));
  batch.insert(batch.end(), other.begin(), other.begin() + static_cast<std::ptrdiff_t>(easy));
  return batch;
}

Stage1Result Stage1Train(const std::vector<Stage1Example>& demos, const Stage1Config& cfg) {
  cfg.Validate();
  const AdapterConfig& ac = cfg.adapter;
  if (demos.empty()) throw ContractError("stage-1 dataset is empty");
  const std::size_t m = ac.chunk_size;
  for (std::size_t i = 0; i < demos.size(); ++i) {
    const Stage1Example& d = demos[i];
    if (d.actions.size() % m != 0) {
      throw ChunkingError("demo " + std::to_string(i) + " has " + std::to_string(d.actions.size()) +
                          " actions, not a multiple of " + std::to_string(m));
    }
    if (d.video.empty() || d.video.size() * m != d.actions.size()) {
      throw AlignmentError("demo " + std::to_string(i) + " has " + std::to_string(d.video.size()) +
                           " video chunks but " + std::to_string(d.actions.size() / m) +
                           " action chunks");
    }
    if (d.video.size() != demos.front().video.size()) {
      throw DimensionError("demos differ in chunk count");
    }
  }

  Rng root = Rng(cfg.seed).Split("stage1");
  Rng init = root.Split("init");
  Stage1Result result{AdapterBundle::Initialize(ac, init), {}, {}, {}, {}};
  SplitHoldout(demos.size(), cfg.holdout_fraction, cfg.seed, result.train_indices,
               result.holdout_indices);

  std::vector<int> tasks(demos.size());
  std::set<int> train_tasks;
  for (std::size_t i = 0; i < demos.size(); ++i) tasks[i] = demos[i].task;
  for (std::size_t i : result.train_indices) train_tasks.insert(tasks[i]);
  double ratio = cfg.hard_negative_ratio;
  if (train_tasks.size() < 2 && ratio < 1.0) {
    result.warnings.push_back("single-task dataset: all negatives are hard negatives");
    ratio = 1.0;
  }

  if (cfg.steps > 0) {
    std::vector<Tensor> rows(demos.size()), chunks(demos.size());
    for (std::size_t i : result.train_indices) {
      rows[i] = GridsToRows(demos[i].video, ac);
      chunks[i] = ActionsToChunks(demos[i].actions, m);
    }
    Rng batches = root.Split("batches");
    AdamState adam = MakeAdam(cfg.lr);
    const std::size_t b = cfg.batch_size;
    for (int step = 0; step < cfg.steps; ++step) {
      const std::size_t anchor =
          result.train_indices[batches.Below(result.train_indices.size())];
      const std::vector<std::size_t> batch =
          SampleBatch(anchor, result.train_indices, tasks, b, ratio, batches);
      std::vector<const Tensor*> row_parts, chunk_parts;
      for (std::size_t i : batch) {
        row_parts.push_back(&rows[i]);
        chunk_parts.push_back(&chunks[i]);
      }
      Graph g;
      const Stage1Loss loss =
          BuildStage1Loss(g, result.bundle, StackRows(row_parts), StackRows(chunk_parts), b, cfg.contrastive);
      const ParameterRecord grads = g.Backward(loss.total);
      result.log.push_back({step + 1, loss.recon.value()[0], loss.contrastive.value()[0],
                            MeanChunkSimilarity(loss.zv.value(), loss.za.value(), b)});
      result.bundle.AdamUpdate(grads, adam);
    }
  }
  result.bundle.Freeze();
  return result;
}

Stage1Evaluation EvaluateStage1(const AdapterBundle& bundle, const std::vector<Stage1Example>& demos,
                                const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ContractError("no demos to evaluate");
  Stage1Evaluation ev;
  for (std::size_t i : indices) {
    const Stage1Example& d = demos.at(i);
    const Tensor za = EncodeActions(bundle, d.actions);
    const Tensor zv = EncodeVideo(bundle, d.video);
    const std::vector<ActionVec> decoded = DecodeActions(bundle, za);
    const Tensor want = ActionsToChunks(d.actions, bundle.config().chunk_size);
    const Tensor got = ActionsToChunks(decoded, bundle.config().chunk_size);
    double se = 0.0;
    for (std::size_t k = 0; k < want.size(); ++k) se += (got[k] - want[k]) * (got[k] - want[k]);
    ev.recon_mse += se / static_cast<double>(want.size());
    ev.pos_sim += align::ChunkSimilarity(zv, za);
  }
  ev.recon_mse /= static_cast<double>(indices.size());
  ev.pos_sim /= static_cast<double>(indices.size());
  return ev;
}

}  // namespace w2a::adapters
