#include "w2a/numerics/graph.h"

#include "w2a/numerics/errors.h"

namespace w2a {

const char* OpKindName(OpKind kind) {
  switch (kind) {
    case OpKind::kParameter: return "parameter";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kAddRow: return "add_row";
    case OpKind::kMulRow: return "mul_row";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kGelu: return "gelu";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kLayerNorm: return "layernorm";
    case OpKind::kSoftmaxRows: return "softmax_rows";
    case OpKind::kLogSoftmaxRows: return "log_softmax_rows";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kDiagonal: return "diagonal";
    case OpKind::kRowMaxOffDiagonal: return "row_max_off_diagonal";
    case OpKind::kNormalizeRows: return "normalize_rows";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kSliceCols: return "slice_cols";
    case OpKind::kConcatRows: return "concat_rows";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kReshape: return "reshape";
    case OpKind::kIm2Col: return "im2col";
    case OpKind::kGroupNorm: return "groupnorm";
    case OpKind::kSegmentMean: return "segment_mean";
    case OpKind::kAttention: return "attention";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (!graph_) throw ContractError("use of an unbound Var");
  return graph_->value(id_);
}

Var Graph::Param(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) return Var(this, it->second);
  const int id = static_cast<int>(nodes_.size());
  Node node{OpKind::kParameter, {}, value, {}, record_, nullptr};
  nodes_.push_back(std::move(node));
  params_.emplace(name, id);
  return Var(this, id);
}

Var Graph::Param(const ParameterRecord& record, std::string_view name) {
  return Param(std::string(name), record.Get(name));
}

Var Graph::Constant(Tensor value) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{OpKind::kConstant, {}, std::move(value), {}, false, nullptr});
  return Var(this, id);
}

bool Graph::AnyRequiresGrad(const std::vector<Var>& inputs) const {
  if (!record_) return false;
  for (const Var& v : inputs) {
    if (nodes_[v.id()].requires_grad) return true;
  }
  return false;
}

Var Graph::Record(OpKind kind, const std::vector<Var>& inputs, Tensor value, BackwardFn fn) {
  const int id = static_cast<int>(nodes_.size());
  Node node;
  node.kind = kind;
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.graph() != this) throw ContractError("operand belongs to a different graph");
    node.inputs.push_back(v.id());
  }
  node.value = std::move(value);
  node.requires_grad = AnyRequiresGrad(inputs);
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, id);
}

Tensor* Graph::GradFor(int id) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return nullptr;
  if (node.grad.empty()) node.grad = Tensor(node.value.shape(), 0.0);
  return &node.grad;
}

ParameterRecord Graph::Backward(Var loss) {
  if (loss.graph() != this) throw ContractError("loss belongs to a different graph");
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + ShapeToString(lv.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  if (nodes_[loss.id()].requires_grad) {
    nodes_[loss.id()].grad = Tensor(lv.shape(), 1.0);
    for (int id = loss.id(); id >= 0; --id) {
      Node& node = nodes_[id];
      if (node.backward && !node.grad.empty()) node.backward(*this, node.grad);
    }
  }
  ParameterRecord grads;
  for (const auto& [name, id] : params_) {
    const Node& node = nodes_[id];
    grads.Set(name, node.grad.empty() ? Tensor(node.value.shape(), 0.0) : node.grad);
  }
  return grads;
}

}  // namespace w2a
