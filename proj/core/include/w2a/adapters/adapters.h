#ifndef W2A_ADAPTERS_ADAPTERS_H_
#define W2A_ADAPTERS_ADAPTERS_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "w2a/align/contrastive.h"
#include "w2a/chunkworld/world.h"
#include "w2a/numerics/adam.h"
#include "w2a/numerics/graph.h"
#include "w2a/numerics/parameters.h"
#include "w2a/worldmodel/engine.h"

// Video adapter B_v, action adapter B_a and action decoder D_a.
//
// Action chunks enter the networks flattened step-major ([a_1, a_2, ...]) and
// divided by chunkworld::kActionBounds, so every coordinate lies in [-1, 1].
// Losses on actions are measured in these normalized units.
namespace w2a::adapters {

struct AdapterConfig {
  std::size_t latent_dim = align::kLatentDim;
  std::size_t chunk_size = 4;
  std::size_t action_dim = chunkworld::kActionDim;
  std::size_t grid_channels = worldmodel::kLatentChannels;
  std::size_t grid_height = worldmodel::kLatentHeight;
  std::size_t grid_width = worldmodel::kLatentWidth;
  std::size_t conv1_channels = 16;
  std::size_t conv2_channels = 32;
  std::size_t norm_groups = 4;

  std::size_t chunk_width() const { return chunk_size * action_dim; }
};

// Parameters of all three networks in one record, under the prefixes
// "bv.", "ba." and "da.".
class AdapterBundle {
 public:
  AdapterBundle(AdapterConfig config, ParameterRecord params, bool frozen);
  static AdapterBundle Initialize(const AdapterConfig& config, Rng& rng);

  const AdapterConfig& config() const { return config_; }
  const ParameterRecord& params() const { return params_; }
  ParameterRecord video_adapter() const { return params_.WithPrefix("bv."); }
  ParameterRecord action_adapter() const { return params_.WithPrefix("ba."); }
  ParameterRecord action_decoder() const { return params_.WithPrefix("da."); }
  bool frozen() const { return frozen_; }
  void Freeze() { frozen_ = true; }

  // FrozenError once frozen.
  void AdamUpdate(const ParameterRecord& grads, AdamState& state);

 private:
  AdapterConfig config_;
  ParameterRecord params_;
  bool frozen_;
};

// Graph building blocks. `grid_rows` is [N*H*W, C] (see GridsToRows);
// `chunks` is [N, M*A] normalized; `z` is [N, D].
Var VideoAdapterForward(Graph& g, const AdapterBundle& bundle, Var grid_rows, std::size_t n);
Var ActionAdapterForward(Graph& g, const AdapterBundle& bundle, Var chunks);
Var DecoderForward(Graph& g, const AdapterBundle& bundle, Var z);

// [C, H, W] grids to channels-last rows, one block of H*W rows per grid.
Tensor GridsToRows(std::span<const worldmodel::VideoLatentChunk> grids, const AdapterConfig& config);
// ChunkingError unless the length is a multiple of M.
Tensor ActionsToChunks(std::span<const chunkworld::ActionVec> actions, std::size_t chunk_size);
// Inverse of ActionsToChunks with each action clipped to the bounds.
std::vector<chunkworld::ActionVec> ChunksToActions(const Tensor& chunks);

// Value-level forms. Trajectories are [T, D].
Tensor EncodeVideo(const AdapterBundle& bundle, std::span<const worldmodel::VideoLatentChunk> video);
Tensor EncodeActions(const AdapterBundle& bundle, std::span<const chunkworld::ActionVec> actions);
std::vector<chunkworld::ActionVec> DecodeActions(const AdapterBundle& bundle, const Tensor& z);

struct Stage1Example {
  std::vector<worldmodel::VideoLatentChunk> video;  // T grids
  std::vector<chunkworld::ActionVec> actions;       // T*M
  int task = 0;
};

struct Stage1Config {
  std::size_t batch_size = 16;
  double hard_negative_ratio = 0.25;
  int steps = 3000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  align::ContrastiveConfig contrastive;
  double holdout_fraction = 0.1;
  AdapterConfig adapter;
  void Validate() const;
};

struct Stage1Metric {
  int step = 0;
  double l_recon = 0.0;
  double l_contrastive = 0.0;
  double pos_sim = 0.0;
};

struct Stage1Result {
  AdapterBundle bundle;
  std::vector<Stage1Metric> log;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> holdout_indices;
  std::vector<std::string> warnings;
};

// L = L_recon + L_contrastive for one minibatch of `batch` demos, stacked
// sample-major: grid rows as GridsToRows, chunks [batch*T, M*A] normalized.
struct Stage1Loss {
  Var total;
  Var recon;
  Var contrastive;
  Var zv;  // [batch*T, D]
  Var za;
};
Stage1Loss BuildStage1Loss(Graph& g, const AdapterBundle& bundle, const Tensor& grid_rows,
                           const Tensor& chunks, std::size_t batch, const align::ContrastiveConfig& cfg);

// Held-out split: a seeded shuffle of demo indices, the first
// round(fraction * n) of which are held out (at least one when n >= 2).
void SplitHoldout(std::size_t n, double fraction, std::uint64_t seed,
                  std::vector<std::size_t>& train, std::vector<std::size_t>& holdout);

// Batch of `batch_size` distinct demo indices led by `anchor`: ceil(ratio *
// (B - 1)) same-task demos, the rest from other tasks. Either pool is topped
// up from the other when it runs short.
std::vector<std::size_t> SampleBatch(std::size_t anchor, const std::vector<std::size_t>& pool,
                                     const std::vector<int>& tasks, std::size_t batch_size,
                                     double hard_negative_ratio, Rng& rng);

Stage1Result Stage1Train(const std::vector<Stage1Example>& demos, const Stage1Config& cfg);

struct Stage1Evaluation {
  double recon_mse = 0.0;  // normalized action units
  double pos_sim = 0.0;    // mean chunk similarity of matched pairs
};
Stage1Evaluation EvaluateStage1(const AdapterBundle& bundle, const std::vector<Stage1Example>& demos,
                                const std::vector<std::size_t>& indices);

}  // namespace w2a::adapters

#endif  // W2A_ADAPTERS_ADAPTERS_H_
