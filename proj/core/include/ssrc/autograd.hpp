#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ssrc/tensor.hpp"

namespace ssrc {

enum class OpKind {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kMatmul,
  kSigmoid,
  kTanh,
  kRelu,
  kConcat,
  kSlice,
  kReduceMean,
  kReduceMax,
  kSum,
  kScale,
  kSoftmax,
  kLogSoftmax,
  kPad,
  kReshape,
  kConv,
  kAvgPool,
  kCustom,
};

std::string_view to_string(OpKind kind);

using NodeId = std::uint32_t;
class Graph;

/// Handle to a node on a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  bool valid() const noexcept { return graph_ != nullptr; }
  Graph& graph() const { return *graph_; }
  NodeId id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t extent(std::size_t axis) const { return value().extent(axis); }
  std::size_t rank() const { return value().rank(); }
  bool requires_grad() const;

 private:
  Graph* graph_ = nullptr;
  NodeId id_ = 0;
};

/// Everything a backward rule may read. `input_grads[i]` is null when input i
/// does not require a gradient; otherwise the rule accumulates into it.
struct BackwardContext {
  const Graph& graph;
  std::span<const NodeId> inputs;
  const Tensor& output;
  const Tensor& grad_output;
  std::span<Tensor* const> input_grads;

  const Tensor& input(std::size_t i) const;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<std::optional<Tensor>> grads) : grads_(std::move(grads)) {}

  bool has(Var v) const { return v.id() < grads_.size() && grads_[v.id()].has_value(); }
  /// Gradient of the loss with respect to `v`; throws if `v` was off the loss path.
  const Tensor& of(Var v) const;

 private:
  std::vector<std::optional<Tensor>> grads_;
};

/// Append-only tape of operations. Node inputs always have smaller ids than
/// the node itself, so reverse id order is a valid backward schedule. One
/// graph belongs to one thread.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var parameter(Tensor value) { return leaf(std::move(value), true); }

  /// Registers the result of an operation. Rejects non-finite values.
  Var record(OpKind kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward);

  /// Reverse-mode sweep from a scalar loss.
  Gradients backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  std::span<const NodeId> inputs(NodeId id) const { return nodes_.at(id).inputs; }
  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }

  /// Number of edges on the longest path from `from` to `to`, if connected.
  std::optional<std::size_t> longest_path(Var from, Var to) const;

  /// Branch tracking: piecewise ops (relu, max) fold their discrete choices
  /// into a signature so callers can detect when two evaluations took
  /// different linear pieces.
  void set_track_branches(bool on) noexcept { track_branches_ = on; }
  bool track_branches() const noexcept { return track_branches_; }
  void note_branch(std::uint64_t decision) noexcept;
  std::uint64_t branch_signature() const noexcept { return branch_signature_; }

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Tensor value;
    BackwardFn backward;
    bool requires_grad;
  };

  std::deque<Node> nodes_;
  bool track_branches_ = false;
  std::uint64_t branch_signature_ = 0;
};

namespace ops {

// Elementwise binary ops. `b` must have the same shape as `a` or a shape equal
// to a trailing suffix of `a`'s shape (broadcast over leading axes).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

Var matmul(Var a, Var b);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);

Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);

// Reductions drop the reduced axes.
Var reduce_mean(Var a, std::vector<std::size_t> axes);
Var reduce_max(Var a, std::vector<std::size_t> axes);
Var sum(Var a);

Var softmax(Var a, std::size_t axis);
Var log_softmax(Var a, std::size_t axis);

/// Zero padding; `before`/`after` give the pad width per axis.
Var pad(Var a, std::vector<std::size_t> before, std::vector<std::size_t> after);
Var reshape(Var a, Shape shape);

}  // namespace ops
}  // namespace ssrc
