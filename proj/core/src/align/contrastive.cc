#include "w2a/align/contrastive.h"

#include <cmath>

#include "w2a/numerics/errors.h"
#include "w2a/numerics/ops.h"

namespace w2a::align {
namespace {

void RequireTrajectory(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " must be [T, D], got " + ShapeToString(t.shape()));
  }
}

double Dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double Cosine(const double* a, const double* b, std::size_t n) {
  const double na = std::sqrt(Dot(a, a, n));
  const double nb = std::sqrt(Dot(b, b, n));
  if (na == 0.0 || nb == 0.0) throw DegenerateLatentError("cosine of a zero-norm latent");
  return Dot(a, b, n) / (na * nb);
}

void RequireSameShape(const Tensor& a, const Tensor& b) {
  RequireTrajectory(a, "trajectory");
  RequireTrajectory(b, "trajectory");
  if (a.shape() != b.shape()) {
    throw DimensionError("trajectory shapes differ: " + ShapeToString(a.shape()) + " vs " +
                         ShapeToString(b.shape()));
  }
}

Var InfoNceTerm(Var logits) {
  return ops::Scale(ops::Mean(ops::Diagonal(ops::LogSoftmaxRows(logits))), -1.0);
}

}  // namespace

std::string_view VariantName(Variant v) {
  switch (v) {
    case Variant::kBiInfoNceChunk: return "bi_infonce_chunk";
    case Variant::kUniInfoNceChunk: return "uni_infonce_chunk";
    case Variant::kMarginalChunk: return "marginal_chunk";
    case Variant::kBiInfoNceGlobal: return "bi_infonce_global";
  }
  return "unknown";
}

std::optional<Variant> ParseVariant(std::string_view name) {
  for (Variant v : {Variant::kBiInfoNceChunk, Variant::kUniInfoNceChunk, Variant::kMarginalChunk,
                    Variant::kBiInfoNceGlobal}) {
    if (VariantName(v) == name) return v;
  }
  return std::nullopt;
}

void ContrastiveConfig::Validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("temperature must be positive and finite");
  }
  if (!std::isfinite(margin)) throw ConfigError("margin must be finite");
}

double ChunkSimilarity(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b);
  const std::size_t t = a.rows(), d = a.cols();
  double sum = 0.0;
  for (std::size_t i = 0; i < t; ++i) sum += Cosine(a.data() + i * d, b.data() + i * d, d);
  return sum / static_cast<double>(t);
}

double GlobalSimilarity(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b);
  return Cosine(a.data(), b.data(), a.size());
}

Var SimilarityMatrix(Var video, Var action, std::size_t batch, Variant variant) {
  if (batch == 0) throw ContractError("empty contrastive batch");
  const Shape& vs = video.shape();
  if (vs.size() != 2 || vs != action.shape() || vs[0] % batch != 0) {
    throw DimensionError("video " + ShapeToString(vs) + " and action " +
                         ShapeToString(action.shape()) + " are not both [B*T, D] for B = " +
                         std::to_string(batch));
  }
  const std::size_t chunks = vs[0] / batch;
  const Shape flat{batch, chunks * vs[1]};
  if (variant == Variant::kBiInfoNceGlobal) {
    Var v = ops::NormalizeRows(ops::Reshape(video, flat));
    Var a = ops::NormalizeRows(ops::Reshape(action, flat));
    return ops::MatMul(v, ops::Transpose(a));
  }
  Var v = ops::Reshape(ops::NormalizeRows(video), flat);
  Var a = ops::Reshape(ops::NormalizeRows(action), flat);
  return ops::Scale(ops::MatMul(v, ops::Transpose(a)), 1.0 / static_cast<double>(chunks));
}

Var ContrastiveLoss(Var video, Var action, std::size_t batch, const ContrastiveConfig& cfg) {
  cfg.Validate();
  Var s = SimilarityMatrix(video, action, batch, cfg.variant);
  switch (cfg.variant) {
    case Variant::kUniInfoNceChunk:
      return InfoNceTerm(ops::Scale(s, 1.0 / cfg.temperature));
    case Variant::kMarginalChunk: {
      if (batch == 1) return ops::Scale(ops::Sum(s), 0.0);
      Var gap = ops::Sub(ops::RowMaxOffDiagonal(s), ops::Diagonal(s));
      return ops::Mean(ops::Relu(ops::AddScalar(gap, cfg.margin)));
    }
    case Variant::kBiInfoNceChunk:
    case Variant::kBiInfoNceGlobal: {
      Var logits = ops::Scale(s, 1.0 / cfg.temperature);
      return ops::Add(InfoNceTerm(logits), InfoNceTerm(ops::Transpose(logits)));
    }
  }
  throw ConfigError("unknown contrastive variant");
}

Tensor StackTrajectories(const std::vector<Tensor>& trajectories) {
  if (trajectories.empty()) throw ContractError("empty contrastive batch");
  const Tensor& first = trajectories.front();
  RequireTrajectory(first, "trajectory");
  std::vector<double> data;
  data.reserve(first.size() * trajectories.size());
  for (const Tensor& t : trajectories) {
    RequireTrajectory(t, "trajectory");
    if (t.shape() != first.shape()) {
      throw DimensionError("mixed trajectory shapes in batch: " + ShapeToString(first.shape()) +
                           " vs " + ShapeToString(t.shape()));
    }
    data.insert(data.end(), t.values().begin(), t.values().end());
  }
  return Tensor({first.rows() * trajectories.size(), first.cols()}, std::move(data));
}

Tensor SimilarityMatrixValue(const std::vector<Tensor>& video, const std::vector<Tensor>& action,
                             Variant variant) {
  if (video.size() != action.size()) {
    throw DimensionError("video and action batches differ in size");
  }
  Graph g(false);
  Var v = g.Constant(StackTrajectories(video));
  Var a = g.Constant(StackTrajectories(action));
  return SimilarityMatrix(v, a, video.size(), variant).value();
}

double ContrastiveLossValue(const std::vector<Tensor>& video, const std::vector<Tensor>& action,
                            const ContrastiveConfig& cfg) {
  if (video.size() != action.size()) {
    throw DimensionError("video and action batches differ in size");
  }
  Graph g(false);
  Var v = g.Constant(StackTrajectories(video));
  Var a = g.Constant(StackTrajectories(action));
  return ContrastiveLoss(v, a, video.size(), cfg).value()[0];
}

double MeanPositiveSimilarity(const Tensor& similarity) {
  const std::size_t n = similarity.rows();
  if (similarity.rank() != 2 || similarity.cols() != n) {
    throw DimensionError("similarity matrix must be square, got " +
                         ShapeToString(similarity.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += similarity.at(i, i);
  return s / static_cast<double>(n);
}

}  // namespace w2a::align
