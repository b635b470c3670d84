#ifndef W2A_NUMERICS_GRAPH_H_
#define W2A_NUMERICS_GRAPH_H_

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "w2a/numerics/parameters.h"
#include "w2a/numerics/tensor.h"

namespace w2a {

enum class OpKind {
  kParameter,
  kConstant,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kAddRow,
  kMulRow,
  kScale,
  kAddScalar,
  kGelu,
  kRelu,
  kTanh,
  kLayerNorm,
  kSoftmaxRows,
  kLogSoftmaxRows,
  kTranspose,
  kSum,
  kMean,
  kDiagonal,
  kRowMaxOffDiagonal,
  kNormalizeRows,
  kConcatCols,
  kSliceCols,
  kConcatRows,
  kGatherRows,
  kReshape,
  kIm2Col,
  kGroupNorm,
  kSegmentMean,
  kAttention,
};

const char* OpKindName(OpKind kind);

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

// Tape of operations in construction order. Inputs of a node always have
// smaller ids, so Backward() can sweep the tape once in reverse.
//
// A graph built with record_gradients = false is a plain forward evaluator:
// parameters behave as constants and no backward closures are kept. Training
// and inference share the same op code, so their forward values agree
// bit-for-bit.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph& graph, const Tensor& grad_out)>;

  explicit Graph(bool record_gradients = true) : record_(record_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf that receives a gradient. Requesting the same name twice returns the
  // same node, so a weight shared by several calls accumulates correctly.
  Var Param(const std::string& name, const Tensor& value);
  Var Param(const ParameterRecord& record, std::string_view name);
  Var Constant(Tensor value);

  std::size_t size() const { return nodes_.size(); }
  bool record_gradients() const { return record_; }
  const Tensor& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  OpKind kind(int id) const { return nodes_[id].kind; }
  const std::vector<int>& inputs(int id) const { return nodes_[id].inputs; }

  // Gradient of the scalar `loss` w.r.t. every Param leaf of this graph.
  ParameterRecord Backward(Var loss);

  // --- for op implementations ---
  Var Record(OpKind kind, const std::vector<Var>& inputs, Tensor value, BackwardFn fn);
  bool AnyRequiresGrad(const std::vector<Var>& inputs) const;
  // Accumulator for node `id`, zero-allocated on first use; nullptr when the
  // node does not take part in differentiation.
  Tensor* GradFor(int id);

 private:
  struct Node {
    OpKind kind;
    std::vector<int> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  bool record_;
  std::vector<Node> nodes_;
  std::map<std::string, int, std::less<>> params_;
};

}  // namespace w2a

#endif  // W2A_NUMERICS_GRAPH_H_
