#ifndef W2A_NUMERICS_OPS_H_
#define W2A_NUMERICS_OPS_H_

#include <cstddef>
#include <vector>

#include "w2a/numerics/graph.h"

// Differentiable operations on Graph nodes. Matrix-shaped ops view a tensor as
// [rows, cols] (see Tensor); a rank-1 tensor is a single row.
namespace w2a::ops {

// GELU uses the tanh approximation
//   0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
inline constexpr double kGeluCubic = 0.044715;
inline constexpr double kNormEps = 1e-5;

Var MatMul(Var a, Var b);

// Equal shapes, or either operand a single element.
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
// x[N, C] with a per-column vector of C values.
Var AddRow(Var x, Var row);
Var MulRow(Var x, Var row);
Var Scale(Var x, double factor);
Var AddScalar(Var x, double value);

Var Gelu(Var x);
Var Relu(Var x);
Var Tanh(Var x);
// Per-row standardization without affine terms.
Var LayerNormRows(Var x, double eps = kNormEps);
Var SoftmaxRows(Var x);
Var LogSoftmaxRows(Var x);
// Divides each row by its Euclidean norm; a zero row raises
// DegenerateLatentError.
Var NormalizeRows(Var x);

Var Transpose(Var x);
Var Sum(Var x);
Var Mean(Var x);
// Diagonal of a square matrix, shape [n].
Var Diagonal(Var x);
// max_{j != i} x[i, j] for a square matrix with n >= 2, shape [n].
Var RowMaxOffDiagonal(Var x);

Var ConcatCols(const std::vector<Var>& parts);
Var SliceCols(Var x, std::size_t begin, std::size_t end);
Var ConcatRows(const std::vector<Var>& parts);
Var GatherRows(Var x, const std::vector<std::size_t>& rows);
Var Reshape(Var x, Shape shape);

// Input rows are pixels of NHWC images: x is [N*H*W, C]. Output rows are
// output pixels, columns ordered (ky, kx, c): [N*OH*OW, k*k*C]. Zero padding.
struct ConvGeometry {
  std::size_t batch, height, width, channels;
  std::size_t kernel, stride, pad;
  std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};
Var Im2Col(Var x, const ConvGeometry& geom);
// x is [N*P, C]; statistics per (sample, channel group) over P positions.
Var GroupNorm(Var x, std::size_t positions, std::size_t groups, double eps = kNormEps);
// x is [N*P, C] -> [N, C], mean over each run of P rows.
Var SegmentMean(Var x, std::size_t positions);
// Multi-head scaled dot-product self-attention core. q, k, v are [N*S, D]
// with the S tokens of sample n in rows n*S .. n*S+S-1.
Var MultiHeadAttention(Var q, Var k, Var v, std::size_t tokens, std::size_t heads);

// Composites.
Var Linear(Var x, Var weight, Var bias);
Var MeanSquaredError(Var prediction, Var target);

}  // namespace w2a::ops

#endif  // W2A_NUMERICS_OPS_H_
