#ifndef SGRPO_AUTODIFF_HPP_
#define SGRPO_AUTODIFF_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include "sgrpo/tensor.hpp"

namespace sgrpo {

// Eager reverse-mode tape over Tensor values. Nodes are created in
// topological order by construction; backward() walks them in reverse.
// The op set is exactly what the micro policy and its losses need.
class Tape {
 public:
  using NodeId = std::int32_t;

  Tape() { nodes_.reserve(512); }

  // Tracked parameter leaf; its gradient is available after backward().
  NodeId leaf(Tensor value);
  // Untracked input (data, masks, recorded logprobs).
  NodeId constant(Tensor value);

  // Reshaped window [offset, offset + rows*cols) of a flat tensor.
  NodeId view(NodeId flat, int offset, int rows, int cols);
  NodeId gather_rows(NodeId m, std::vector<int> row_ids);
  // Picks (row, col) entries of m into a 1 x K vector.
  NodeId gather_elems(NodeId m, std::vector<std::pair<int, int>> idx);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId add_rowvec(NodeId m, NodeId v);
  NodeId scale(NodeId a, double c);
  NodeId matmul(NodeId a, NodeId b);
  // a * b^T without materializing a transpose.
  NodeId matmul_bt(NodeId a, NodeId b);
  NodeId row_softmax(NodeId a);
  NodeId row_log_softmax(NodeId a);
  // Row-wise x / sqrt(mean(x^2) + eps) * gain; gain is 1 x cols.
  NodeId rms_norm(NodeId x, NodeId gain);
  NodeId tanh_op(NodeId a);
  NodeId exp_op(NodeId a);
  NodeId clamp(NodeId a, double lo, double hi);
  NodeId min_op(NodeId a, NodeId b);
  NodeId sum(NodeId a);

  // Seeds d(root)=1 and accumulates gradients; root must be 1 x 1.
  void backward(NodeId root);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  // Valid after backward() for nodes that require grad.
  const Tensor& grad(NodeId id) const { return grads_[static_cast<std::size_t>(id)]; }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kLeaf, kConst, kView, kGatherRows, kGatherElems, kAdd, kSub, kMul,
    kAddRowVec, kScale, kMatmul, kMatmulBt, kRowSoftmax, kRowLogSoftmax,
    kRmsNorm, kTanh, kExp, kClamp, kMin, kSum,
  };

  struct Node {
    Op op;
    bool requires_grad = false;
    NodeId in0 = -1;
    NodeId in1 = -1;
    Tensor value;
    std::vector<int> iaux;     // gather indices, view offset
    std::vector<double> daux;  // clamp bounds, scale factor, rmsnorm denoms
  };

  NodeId push(Node n);
  bool needs_grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  Tensor& grad_buf(NodeId id);
  void backward_node(NodeId id);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

}  // namespace sgrpo

#endif  // SGRPO_AUTODIFF_HPP_
