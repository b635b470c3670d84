#ifndef W2A_ALIGN_CONTRASTIVE_H_
#define W2A_ALIGN_CONTRASTIVE_H_

#include <optional>
#include <string_view>
#include <vector>

#include "w2a/numerics/graph.h"
#include "w2a/numerics/tensor.h"

// Shared-latent similarity and contrastive objectives.
//
// A latent trajectory is a [T, D] tensor, one row per chunk. Batched graph
// inputs stack B trajectories sample-major into [B*T, D].
namespace w2a::align {

inline constexpr std::size_t kLatentDim = 32;

enum class Variant { kBiInfoNceChunk, kUniInfoNceChunk, kMarginalChunk, kBiInfoNceGlobal };
std::string_view VariantName(Variant v);
std::optional<Variant> ParseVariant(std::string_view name);

struct ContrastiveConfig {
  double temperature = 0.1;
  Variant variant = Variant::kBiInfoNceChunk;
  double margin = 0.2;  // marginal_chunk only
  void Validate() const;
};

// (1/T) sum_t cos(a_t, b_t).
double ChunkSimilarity(const Tensor& a, const Tensor& b);
// Cosine of the flattened trajectories.
double GlobalSimilarity(const Tensor& a, const Tensor& b);

// S[i][j] = sim(video_i, action_j) for the chunk or global similarity implied
// by `variant`. video and action are [B*T, D]; result is [B, B].
Var SimilarityMatrix(Var video, Var action, std::size_t batch, Variant variant);

// Batch-mean contrastive loss with pair i as the positive for row/column i.
Var ContrastiveLoss(Var video, Var action, std::size_t batch, const ContrastiveConfig& cfg);

// Stacks a list of [T, D] trajectories into [B*T, D]; all must share T and D.
Tensor StackTrajectories(const std::vector<Tensor>& trajectories);

// Value-only forms over trajectory lists.
Tensor SimilarityMatrixValue(const std::vector<Tensor>& video, const std::vector<Tensor>& action,
                             Variant variant);
double ContrastiveLossValue(const std::vector<Tensor>& video, const std::vector<Tensor>& action,
                            const ContrastiveConfig& cfg);

// Mean of the diagonal of a square similarity matrix.
double MeanPositiveSimilarity(const Tensor& similarity);

}  // namespace w2a::align

#endif  // W2A_ALIGN_CONTRASTIVE_H_
