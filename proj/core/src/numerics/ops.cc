#include "w2a/numerics/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "w2a/numerics/errors.h"

namespace w2a::ops {
namespace {

Graph& SameGraph(const std::vector<Var>& vars) {
  Graph* g = vars.front().graph();
  if (!g) throw ContractError("use of an unbound Var");
  for (const Var& v : vars) {
    if (v.graph() != g) throw ContractError("operands belong to different graphs");
  }
  return *g;
}

void RequireMatrix(const Tensor& t, const char* op) {
  if (t.rank() > 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " + ShapeToString(t.shape()));
  }
}

Shape MatrixShape(std::size_t r, std::size_t c) { return {r, c}; }

enum class Binary { kAdd, kSub, kMul };

Var BinaryOp(Var a, Var b, Binary kind) {
  Graph& g = SameGraph({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool same = av.shape() == bv.shape();
  const bool a_scalar = av.size() == 1 && !same;
  const bool b_scalar = bv.size() == 1 && !same;
  if (!same && !a_scalar && !b_scalar) {
    throw DimensionError("incompatible shapes " + ShapeToString(av.shape()) + " and " +
                         ShapeToString(bv.shape()));
  }
  const Tensor& big = a_scalar ? bv : av;
  Tensor out(big.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a_scalar ? av[0] : av[i];
    const double y = b_scalar ? bv[0] : bv[i];
    switch (kind) {
      case Binary::kAdd: out[i] = x + y; break;
      case Binary::kSub: out[i] = x - y; break;
      case Binary::kMul: out[i] = x * y; break;
    }
  }
  const int ia = a.id(), ib = b.id();
  const OpKind op = kind == Binary::kAdd ? OpKind::kAdd
                    : kind == Binary::kSub ? OpKind::kSub
                                           : OpKind::kMul;
  return g.Record(op, {a, b}, std::move(out),
                  [ia, ib, kind, a_scalar, b_scalar](Graph& g, const Tensor& go) {
                    const Tensor& av = g.value(ia);
                    const Tensor& bv = g.value(ib);
                    const std::size_t n = go.size();
                    if (Tensor* ga = g.GradFor(ia)) {
                      for (std::size_t i = 0; i < n; ++i) {
                        double d = go[i];
                        if (kind == Binary::kMul) d *= b_scalar ? bv[0] : bv[i];
                        (*ga)[a_scalar ? 0 : i] += d;
                      }
                    }
                    if (Tensor* gb = g.GradFor(ib)) {
                      for (std::size_t i = 0; i < n; ++i) {
                        double d = go[i];
                        if (kind == Binary::kSub) d = -d;
                        if (kind == Binary::kMul) d *= a_scalar ? av[0] : av[i];
                        (*gb)[b_scalar ? 0 : i] += d;
                      }
                    }
                  });
}

template <typename F, typename DF>
Var Unary(Var x, OpKind kind, F f, DF df) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  const int ix = x.id();
  return g.Record(kind, {x}, std::move(out), [ix, df](Graph& g, const Tensor& go) {
    Tensor* gx = g.GradFor(ix);
    const Tensor& xv = g.value(ix);
    for (std::size_t i = 0; i < go.size(); ++i) (*gx)[i] += go[i] * df(xv[i]);
  });
}

// Shared by LayerNormRows and GroupNorm: normalize `count` elements addressed
// through `index(j)` and write back. Returns 1/sigma.
template <typename Index>
double NormalizeSpan(const Tensor& in, Tensor& out, std::size_t count, Index index, double eps) {
  double mean = 0.0;
  for (std::size_t j = 0; j < count; ++j) mean += in[index(j)];
  mean /= static_cast<double>(count);
  double var = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    const double d = in[index(j)] - mean;
    var += d * d;
  }
  var /= static_cast<double>(count);
  const double inv = 1.0 / std::sqrt(var + eps);
  for (std::size_t j = 0; j < count; ++j) out[index(j)] = (in[index(j)] - mean) * inv;
  return inv;
}

template <typename Index>
void NormalizeSpanBackward(const Tensor& y, const Tensor& go, Tensor& gx, std::size_t count,
                           Index index, double inv) {
  double mean_g = 0.0, mean_gy = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    mean_g += go[index(j)];
    mean_gy += go[index(j)] * y[index(j)];
  }
  mean_g /= static_cast<double>(count);
  mean_gy /= static_cast<double>(count);
  for (std::size_t j = 0; j < count; ++j) {
    gx[index(j)] += inv * (go[index(j)] - mean_g - y[index(j)] * mean_gy);
  }
}

}  // namespace

Var MatMul(Var a, Var b) {
  Graph& g = SameGraph({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireMatrix(av, "matmul");
  RequireMatrix(bv, "matmul");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw DimensionError("matmul inner dimensions differ: " + ShapeToString(av.shape()) + " x " +
                         ShapeToString(bv.shape()));
  }
  Tensor out(MatrixShape(m, n));
  Gemm(av.data(), bv.data(), out.data(), m, k, n, false, false, false);
  const int ia = a.id(), ib = b.id();
  return g.Record(OpKind::kMatMul, {a, b}, std::move(out),
                  [ia, ib, m, k, n](Graph& g, const Tensor& go) {
                    if (Tensor* ga = g.GradFor(ia)) {
                      Gemm(go.data(), g.value(ib).data(), ga->data(), m, n, k, false, true, true);
                    }
                    if (Tensor* gb = g.GradFor(ib)) {
                      Gemm(g.value(ia).data(), go.data(), gb->data(), k, m, n, true, false, true);
                    }
                  });
}

Var Add(Var a, Var b) { return BinaryOp(a, b, Binary::kAdd); }
Var Sub(Var a, Var b) { return BinaryOp(a, b, Binary::kSub); }
Var Mul(Var a, Var b) { return BinaryOp(a, b, Binary::kMul); }

Var AddRow(Var x, Var row) {
  Graph& g = SameGraph({x, row});
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (rv.size() != c) {
    throw DimensionError("row vector " + ShapeToString(rv.shape()) + " does not match columns of " +
                         ShapeToString(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += rv[j];
  const int ix = x.id(), ir = row.id();
  return g.Record(OpKind::kAddRow, {x, row}, std::move(out),
                  [ix, ir, r, c](Graph& g, const Tensor& go) {
                    if (Tensor* gx = g.GradFor(ix))
                      for (std::size_t i = 0; i < go.size(); ++i) (*gx)[i] += go[i];
                    if (Tensor* gr = g.GradFor(ir))
                      for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j) (*gr)[j] += go[i * c + j];
                  });
}

Var MulRow(Var x, Var row) {
  Graph& g = SameGraph({x, row});
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (rv.size() != c) {
    throw DimensionError("row vector " + ShapeToString(rv.shape()) + " does not match columns of " +
                         ShapeToString(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] *= rv[j];
  const int ix = x.id(), ir = row.id();
  return g.Record(OpKind::kMulRow, {x, row}, std::move(out),
                  [ix, ir, r, c](Graph& g, const Tensor& go) {
                    const Tensor& xv = g.value(ix);
                    const Tensor& rv = g.value(ir);
                    if (Tensor* gx = g.GradFor(ix))
                      for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j) (*gx)[i * c + j] += go[i * c + j] * rv[j];
                    if (Tensor* gr = g.GradFor(ir))
                      for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j) (*gr)[j] += go[i * c + j] * xv[i * c + j];
                  });
}

Var Scale(Var x, double factor) {
  return Unary(
      x, OpKind::kScale, [factor](double v) { return v * factor; },
      [factor](double) { return factor; });
}

Var AddScalar(Var x, double value) {
  return Unary(
      x, OpKind::kAddScalar, [value](double v) { return v + value; }, [](double) { return 1.0; });
}

Var Gelu(Var x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  return Unary(
      x, OpKind::kGelu,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + kGeluCubic * v * v * v))); },
      [](double v) {
        const double t = std::tanh(c * (v + kGeluCubic * v * v * v));
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * kGeluCubic * v * v);
      });
}

Var Relu(Var x) {
  return Unary(
      x, OpKind::kRelu, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var Tanh(Var x) {
  return Unary(
      x, OpKind::kTanh, [](double v) { return std::tanh(v); },
      [](double v) {
        const double t = std::tanh(v);
        return 1.0 - t * t;
      });
}

Var LayerNormRows(Var x, double eps) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out(xv.shape());
  std::vector<double> inv(r);
  for (std::size_t i = 0; i < r; ++i) {
    inv[i] = NormalizeSpan(xv, out, c, [i, c](std::size_t j) { return i * c + j; }, eps);
  }
  const int ix = x.id();
  const int self = static_cast<int>(g.size());
  return g.Record(OpKind::kLayerNorm, {x}, std::move(out),
                  [ix, self, r, c, inv = std::move(inv)](Graph& g, const Tensor& go) {
                    Tensor* gx = g.GradFor(ix);
                    const Tensor& y = g.value(self);
                    for (std::size_t i = 0; i < r; ++i) {
                      NormalizeSpanBackward(y, go, *gx, c,
                                            [i, c](std::size_t j) { return i * c + j; }, inv[i]);
                    }
                  });
}

Var SoftmaxRows(Var x) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < r; ++i) {
    const double* xi = xv.data() + i * c;
    double* yi = out.data() + i * c;
    const double mx = *std::max_element(xi, xi + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += (yi[j] = std::exp(xi[j] - mx));
    for (std::size_t j = 0; j < c; ++j) yi[j] /= sum;
  }
  const int ix = x.id();
  const int self = static_cast<int>(g.size());
  return g.Record(OpKind::kSoftmaxRows, {x}, std::move(out),
                  [ix, self, r, c](Graph& g, const Tensor& go) {
                    Tensor* gx = g.GradFor(ix);
                    const Tensor& y = g.value(self);
                    for (std::size_t i = 0; i < r; ++i) {
                      double dot = 0.0;
                      for (std::size_t j = 0; j < c; ++j) dot += go[i * c + j] * y[i * c + j];
                      for (std::size_t j = 0; j < c; ++j)
                        (*gx)[i * c + j] += y[i * c + j] * (go[i * c + j] - dot);
                    }
                  });
}

Var LogSoftmaxRows(Var x) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < r; ++i) {
    const double* xi = xv.data() + i * c;
    const double mx = *std::max_element(xi, xi + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(xi[j] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xi[j] - lse;
  }
  const int ix = x.id();
  const int self = static_cast<int>(g.size());
  return g.Record(OpKind::kLogSoftmaxRows, {x}, std::move(out),
                  [ix, self, r, c](Graph& g, const Tensor& go) {
                    Tensor* gx = g.GradFor(ix);
                    const Tensor& y = g.value(self);
                    for (std::size_t i = 0; i < r; ++i) {
                      double sum = 0.0;
                      for (std::size_t j = 0; j < c; ++j) sum += go[i * c + j];
                      for (std::size_t j = 0; j < c; ++j)
                        (*gx)[i * c + j] += go[i * c + j] - std::exp(y[i * c + j]) * sum;
                    }
                  });
}

Var NormalizeRows(Var x) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out(xv.shape());
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < c; ++j) ss += xv[i * c + j] * xv[i * c + j];
    const double norm = std::sqrt(ss);
    if (!(norm > 0.0)) {
      throw DegenerateLatentError("row " + std::to_string(i) + " has zero norm; cosine undefined");
    }
    norms[i] = norm;
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] / norm;
  }
  const int ix = x.id();
  const int self = static_cast<int>(g.size());
  return g.Record(OpKind::kNormalizeRows, {x}, std::move(out),
                  [ix, self, r, c, norms = std::move(norms)](Graph& g, const Tensor& go) {
                    Tensor* gx = g.GradFor(ix);
                    const Tensor& y = g.value(self);
                    for (std::size_t i = 0; i < r; ++i) {
                      double dot = 0.0;
                      for (std::size_t j = 0; j < c; ++j) dot += go[i * c + j] * y[i * c + j];
                      for (std::size_t j = 0; j < c; ++j)
                        (*gx)[i * c + j] += (go[i * c + j] - y[i * c + j] * dot) / norms[i];
                    }
                  });
}

Var Transpose(Var x) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  RequireMatrix(xv, "transpose");
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out(MatrixShape(c, r));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
  const int ix = x.id();
  return g.Record(OpKind::kTranspose, {x}, std::move(out), [ix, r, c](Graph& g, const Tensor& go) {
    Tensor* gx = g.GradFor(ix);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*gx)[i * c + j] += go[j * r + i];
  });
}

Var Sum(Var x) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += xv[i];
  const int ix = x.id();
  return g.Record(OpKind::kSum, {x}, Tensor::Scalar(s), [ix](Graph& g, const Tensor& go) {
    Tensor* gx = g.GradFor(ix);
    for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += go[0];
  });
}

Var Mean(Var x) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  const double n = static_cast<double>(xv.size());
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += xv[i];
  const int ix = x.id();
  return g.Record(OpKind::kMean, {x}, Tensor::Scalar(s / n), [ix, n](Graph& g, const Tensor& go) {
    Tensor* gx = g.GradFor(ix);
    for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += go[0] / n;
  });
}

Var Diagonal(Var x) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  RequireMatrix(xv, "diagonal");
  const std::size_t n = xv.rows();
  if (xv.cols() != n) throw DimensionError("diagonal needs a square matrix, got " + ShapeToString(xv.shape()));
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) out[i] = xv[i * n + i];
  const int ix = x.id();
  return g.Record(OpKind::kDiagonal, {x}, std::move(out), [ix, n](Graph& g, const Tensor& go) {
    Tensor* gx = g.GradFor(ix);
    for (std::size_t i = 0; i < n; ++i) (*gx)[i * n + i] += go[i];
  });
}

Var RowMaxOffDiagonal(Var x) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  RequireMatrix(xv, "row_max_off_diagonal");
  const std::size_t n = xv.rows();
  if (xv.cols() != n || n < 2) {
    throw DimensionError("row_max_off_diagonal needs a square matrix with n >= 2, got " +
                         ShapeToString(xv.shape()));
  }
  Tensor out({n});
  std::vector<std::size_t> arg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && xv[i * n + j] > best) {
        best = xv[i * n + j];
        arg[i] = j;
      }
    }
    out[i] = best;
  }
  const int ix = x.id();
  return g.Record(OpKind::kRowMaxOffDiagonal, {x}, std::move(out),
                  [ix, n, arg = std::move(arg)](Graph& g, const Tensor& go) {
                    Tensor* gx = g.GradFor(ix);
                    for (std::size_t i = 0; i < n; ++i) (*gx)[i * n + arg[i]] += go[i];
                  });
}

Var ConcatCols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  Graph& g = SameGraph(parts);
  const std::size_t r = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.value().rows() != r) throw DimensionError("concat_cols row counts differ");
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor out(MatrixShape(r, total));
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(pv.data() + i * widths[k], widths[k], out.data() + i * total + off);
    off += widths[k];
  }
  std::vector<int> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return g.Record(OpKind::kConcatCols, parts, std::move(out),
                  [ids, widths, r, total](Graph& g, const Tensor& go) {
                    std::size_t off = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (Tensor* gp = g.GradFor(ids[k])) {
                        for (std::size_t i = 0; i < r; ++i)
                          for (std::size_t j = 0; j < widths[k]; ++j)
                            (*gp)[i * widths[k] + j] += go[i * total + off + j];
                      }
                      off += widths[k];
                    }
                  });
}

Var SliceCols(Var x, std::size_t begin, std::size_t end) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (begin >= end || end > c) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + ShapeToString(xv.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out(MatrixShape(r, w));
  for (std::size_t i = 0; i < r; ++i) std::copy_n(xv.data() + i * c + begin, w, out.data() + i * w);
  const int ix = x.id();
  return g.Record(OpKind::kSliceCols, {x}, std::move(out),
                  [ix, r, c, w, begin](Graph& g, const Tensor& go) {
                    Tensor* gx = g.GradFor(ix);
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < w; ++j) (*gx)[i * c + begin + j] += go[i * w + j];
                  });
}

Var ConcatRows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  Graph& g = SameGraph(parts);
  const std::size_t c = parts[0].value().cols();
  std::size_t total = 0;
  std::vector<std::size_t> sizes;
  for (const Var& p : parts) {
    if (p.value().cols() != c) throw DimensionError("concat_rows column counts differ");
    sizes.push_back(p.value().size());
    total += p.value().rows();
  }
  std::vector<double> data;
  data.reserve(total * c);
  for (const Var& p : parts) data.insert(data.end(), p.value().values().begin(), p.value().values().end());
  std::vector<int> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return g.Record(OpKind::kConcatRows, parts, Tensor(MatrixShape(total, c), std::move(data)),
                  [ids, sizes](Graph& g, const Tensor& go) {
                    std::size_t off = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (Tensor* gp = g.GradFor(ids[k]))
                        for (std::size_t i = 0; i < sizes[k]; ++i) (*gp)[i] += go[off + i];
                      off += sizes[k];
                    }
                  });
}

Var GatherRows(Var x, const std::vector<std::size_t>& rows) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  const std::size_t c = xv.cols();
  if (rows.empty()) throw ContractError("gather of zero rows");
  Tensor out(MatrixShape(rows.size(), c));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.rows()) throw DimensionError("gather row index out of range");
    std::copy_n(xv.data() + rows[i] * c, c, out.data() + i * c);
  }
  const int ix = x.id();
  return g.Record(OpKind::kGatherRows, {x}, std::move(out), [ix, rows, c](Graph& g, const Tensor& go) {
    Tensor* gx = g.GradFor(ix);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) (*gx)[rows[i] * c + j] += go[i * c + j];
  });
}

Var Reshape(Var x, Shape shape) {
  Graph& g = *x.graph();
  Tensor out = x.value().Reshaped(std::move(shape));
  const int ix = x.id();
  return g.Record(OpKind::kReshape, {x}, std::move(out), [ix](Graph& g, const Tensor& go) {
    Tensor* gx = g.GradFor(ix);
    for (std::size_t i = 0; i < go.size(); ++i) (*gx)[i] += go[i];
  });
}

Var Im2Col(Var x, const ConvGeometry& geom) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  const std::size_t n = geom.batch, h = geom.height, w = geom.width, ch = geom.channels;
  if (xv.rows() != n * h * w || xv.cols() != ch) {
    throw DimensionError("im2col input " + ShapeToString(xv.shape()) + " does not match geometry " +
                         ShapeToString({n * h * w, ch}));
  }
  const std::size_t oh = geom.out_height(), ow = geom.out_width(), k = geom.kernel;
  const std::size_t cols = k * k * ch;
  // Precompute the source row for every (output pixel, ky, kx); -1 is padding.
  std::vector<long> src(n * oh * ow * k * k, -1);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            const long iy = static_cast<long>(oy * geom.stride + ky) - static_cast<long>(geom.pad);
            const long ix = static_cast<long>(ox * geom.stride + kx) - static_cast<long>(geom.pad);
            const std::size_t slot = (((b * oh + oy) * ow + ox) * k + ky) * k + kx;
            if (iy >= 0 && ix >= 0 && iy < static_cast<long>(h) && ix < static_cast<long>(w)) {
              src[slot] = static_cast<long>((b * h + iy) * w + ix);
            }
          }
  Tensor out(MatrixShape(n * oh * ow, cols));
  for (std::size_t slot = 0; slot < src.size(); ++slot) {
    if (src[slot] < 0) continue;
    std::copy_n(xv.data() + src[slot] * ch, ch, out.data() + slot * ch);
  }
  const int id = x.id();
  return g.Record(OpKind::kIm2Col, {x}, std::move(out),
                  [id, ch, src = std::move(src)](Graph& g, const Tensor& go) {
                    Tensor* gx = g.GradFor(id);
                    for (std::size_t slot = 0; slot < src.size(); ++slot) {
                      if (src[slot] < 0) continue;
                      double* dst = gx->data() + src[slot] * ch;
                      const double* from = go.data() + slot * ch;
                      for (std::size_t c = 0; c < ch; ++c) dst[c] += from[c];
                    }
                  });
}

Var GroupNorm(Var x, std::size_t positions, std::size_t groups, double eps) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  const std::size_t c = xv.cols();
  if (positions == 0 || xv.rows() % positions != 0 || groups == 0 || c % groups != 0) {
    throw DimensionError("groupnorm geometry does not divide " + ShapeToString(xv.shape()));
  }
  const std::size_t n = xv.rows() / positions, per = c / groups, count = positions * per;
  Tensor out(xv.shape());
  std::vector<double> inv(n * groups);
  auto indexer = [positions, per, c](std::size_t b, std::size_t gi) {
    return [=](std::size_t j) { return (b * positions + j / per) * c + gi * per + j % per; };
  };
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t gi = 0; gi < groups; ++gi)
      inv[b * groups + gi] = NormalizeSpan(xv, out, count, indexer(b, gi), eps);
  const int ix = x.id();
  const int self = static_cast<int>(g.size());
  return g.Record(OpKind::kGroupNorm, {x}, std::move(out),
                  [ix, self, n, groups, count, indexer, inv = std::move(inv)](Graph& g,
                                                                              const Tensor& go) {
                    Tensor* gx = g.GradFor(ix);
                    const Tensor& y = g.value(self);
                    for (std::size_t b = 0; b < n; ++b)
                      for (std::size_t gi = 0; gi < groups; ++gi)
                        NormalizeSpanBackward(y, go, *gx, count, indexer(b, gi), inv[b * groups + gi]);
                  });
}

Var SegmentMean(Var x, std::size_t positions) {
  Graph& g = *x.graph();
  const Tensor& xv = x.value();
  const std::size_t c = xv.cols();
  if (positions == 0 || xv.rows() % positions != 0) {
    throw DimensionError("segment_mean positions do not divide " + ShapeToString(xv.shape()));
  }
  const std::size_t n = xv.rows() / positions;
  const double scale = 1.0 / static_cast<double>(positions);
  Tensor out(MatrixShape(n, c));
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < positions; ++p)
      for (std::size_t j = 0; j < c; ++j) out[b * c + j] += xv[(b * positions + p) * c + j] * scale;
  const int ix = x.id();
  return g.Record(OpKind::kSegmentMean, {x}, std::move(out),
                  [ix, n, positions, c, scale](Graph& g, const Tensor& go) {
                    Tensor* gx = g.GradFor(ix);
                    for (std::size_t b = 0; b < n; ++b)
                      for (std::size_t p = 0; p < positions; ++p)
                        for (std::size_t j = 0; j < c; ++j)
                          (*gx)[(b * positions + p) * c + j] += go[b * c + j] * scale;
                  });
}

Var MultiHeadAttention(Var q, Var k, Var v, std::size_t tokens, std::size_t heads) {
  Graph& g = SameGraph({q, k, v});
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  const std::size_t rows = qv.rows(), d = qv.cols();
  if (kv.shape() != qv.shape() || vv.shape() != qv.shape() || tokens == 0 || rows % tokens != 0 ||
      heads == 0 || d % heads != 0) {
    throw DimensionError("attention operands " + ShapeToString(qv.shape()) + ", " +
                         ShapeToString(kv.shape()) + ", " + ShapeToString(vv.shape()) +
                         " do not fit tokens/heads");
  }
  const std::size_t n = rows / tokens, dh = d / heads, s = tokens;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> probs(n * heads * s * s);
  Tensor out(qv.shape());
  std::vector<double> row(s);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < s; ++i) {
        const double* qi = qv.data() + (b * s + i) * d + h * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < s; ++j) {
          const double* kj = kv.data() + (b * s + j) * d + h * dh;
          double dot = 0.0;
          for (std::size_t e = 0; e < dh; ++e) dot += qi[e] * kj[e];
          row[j] = dot * scale;
          mx = std::max(mx, row[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < s; ++j) sum += (row[j] = std::exp(row[j] - mx));
        double* p = probs.data() + ((b * heads + h) * s + i) * s;
        double* oi = out.data() + (b * s + i) * d + h * dh;
        for (std::size_t j = 0; j < s; ++j) {
          p[j] = row[j] / sum;
          const double* vj = vv.data() + (b * s + j) * d + h * dh;
          for (std::size_t e = 0; e < dh; ++e) oi[e] += p[j] * vj[e];
        }
      }
  const int iq = q.id(), ik = k.id(), iv = v.id();
  return g.Record(
      OpKind::kAttention, {q, k, v}, std::move(out),
      [iq, ik, iv, n, heads, s, d, dh, scale, probs = std::move(probs)](Graph& g, const Tensor& go) {
        const Tensor& qv = g.value(iq);
        const Tensor& kv = g.value(ik);
        const Tensor& vv = g.value(iv);
        Tensor* gq = g.GradFor(iq);
        Tensor* gk = g.GradFor(ik);
        Tensor* gv = g.GradFor(iv);
        std::vector<double> dp(s), ds(s);
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t i = 0; i < s; ++i) {
              const double* p = probs.data() + ((b * heads + h) * s + i) * s;
              const double* goi = go.data() + (b * s + i) * d + h * dh;
              double dot = 0.0;
              for (std::size_t j = 0; j < s; ++j) {
                const double* vj = vv.data() + (b * s + j) * d + h * dh;
                double acc = 0.0;
                for (std::size_t e = 0; e < dh; ++e) acc += goi[e] * vj[e];
                dp[j] = acc;
                dot += p[j] * acc;
                if (gv) {
                  double* gvj = gv->data() + (b * s + j) * d + h * dh;
                  for (std::size_t e = 0; e < dh; ++e) gvj[e] += p[j] * goi[e];
                }
              }
              for (std::size_t j = 0; j < s; ++j) ds[j] = p[j] * (dp[j] - dot) * scale;
              const double* qi = qv.data() + (b * s + i) * d + h * dh;
              for (std::size_t j = 0; j < s; ++j) {
                const double* kj = kv.data() + (b * s + j) * d + h * dh;
                if (gq) {
                  double* gqi = gq->data() + (b * s + i) * d + h * dh;
                  for (std::size_t e = 0; e < dh; ++e) gqi[e] += ds[j] * kj[e];
                }
                if (gk) {
                  double* gkj = gk->data() + (b * s + j) * d + h * dh;
                  for (std::size_t e = 0; e < dh; ++e) gkj[e] += ds[j] * qi[e];
                }
              }
            }
      });
}

Var Linear(Var x, Var weight, Var bias) { return AddRow(MatMul(x, weight), bias); }

Var MeanSquaredError(Var prediction, Var target) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("mse operands differ: " + ShapeToString(prediction.shape()) + " vs " +
                         ShapeToString(target.shape()));
  }
  Var diff = Sub(prediction, target);
  return Mean(Mul(diff, diff));
}

}  // namespace w2a::ops
