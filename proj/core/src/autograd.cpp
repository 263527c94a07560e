#include "ssrc/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ssrc/error.hpp"
#include "ssrc/rng.hpp"

namespace ssrc {

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRelu: return "relu";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kReduceMean: return "reduce-mean";
    case OpKind::kReduceMax: return "reduce-max";
    case OpKind::kSum: return "sum";
    case OpKind::kScale: return "scale";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSoftmax: return "log-softmax";
    case OpKind::kPad: return "pad";
    case OpKind::kReshape: return "reshape";
    case OpKind::kConv: return "conv";
    case OpKind::kAvgPool: return "avg-pool";
    case OpKind::kCustom: return "custom";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph_->value(id_); }
bool Var::requires_grad() const { return graph_->requires_grad(id_); }

const Tensor& BackwardContext::input(std::size_t i) const { return graph.value(inputs[i]); }

const Tensor& Gradients::of(Var v) const {
  require(has(v), ErrorCode::kInvalidArgument,
          "no gradient recorded for node " + std::to_string(v.id()));
  return *grads_[v.id()];
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  require(value.all_finite(), ErrorCode::kNonFinite, "non-finite leaf value");
  nodes_.push_back(Node{OpKind::kLeaf, {}, std::move(value), {}, requires_grad});
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

Var Graph::record(OpKind kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward) {
  const auto id = static_cast<NodeId>(nodes_.size());
  bool needs_grad = false;
  for (NodeId in : inputs) {
    require(in < id, ErrorCode::kInvalidArgument, "input node does not precede its consumer");
    needs_grad = needs_grad || nodes_[in].requires_grad;
  }
  if (!value.all_finite()) {
    fail(ErrorCode::kNonFinite, "non-finite output from " + std::string(to_string(kind)));
  }
  if (!needs_grad) backward = nullptr;
  nodes_.push_back(Node{kind, std::move(inputs), std::move(value), std::move(backward), needs_grad});
  return Var(this, id);
}

Gradients Graph::backward(Var loss) {
  require(loss.valid() && &loss.graph() == this && loss.id() < nodes_.size(),
          ErrorCode::kBackwardBeforeForward, "loss is not a node of this graph");
  const Tensor& loss_value = nodes_[loss.id()].value;
  require(loss_value.size() == 1, ErrorCode::kNonScalarLoss,
          "loss has shape " + shape_string(loss_value.shape()));

  std::vector<std::optional<Tensor>> grads(loss.id() + 1);
  grads[loss.id()] = Tensor(loss_value.shape(), 1.0);

  std::vector<Tensor*> input_grads;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!grads[id] || !node.backward) continue;
    if (!grads[id]->all_finite()) {
      fail(ErrorCode::kNonFinite,
           "non-finite gradient reaching " + std::string(to_string(node.kind)));
    }
    input_grads.assign(node.inputs.size(), nullptr);
    for (std::size_t j = 0; j < node.inputs.size(); ++j) {
      const NodeId in = node.inputs[j];
      if (!nodes_[in].requires_grad) continue;
      if (!grads[in]) grads[in] = Tensor(nodes_[in].value.shape(), 0.0);
      input_grads[j] = &*grads[in];
    }
    node.backward(BackwardContext{*this, node.inputs, node.value, *grads[id], input_grads});
  }
  for (std::size_t id = 0; id < grads.size(); ++id) {
    if (grads[id] && !nodes_[id].requires_grad) grads[id].reset();
    if (grads[id] && !grads[id]->all_finite()) {
      fail(ErrorCode::kNonFinite, "non-finite gradient at node " + std::to_string(id));
    }
  }
  return Gradients(std::move(grads));
}

std::optional<std::size_t> Graph::longest_path(Var from, Var to) const {
  if (from.id() > to.id()) return std::nullopt;
  constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> depth(to.id() - from.id() + 1, kUnreached);
  depth[0] = 0;
  for (NodeId id = from.id() + 1; id <= to.id(); ++id) {
    for (NodeId in : nodes_[id].inputs) {
      if (in < from.id()) continue;
      const std::size_t d = depth[in - from.id()];
      if (d == kUnreached) continue;
      auto& mine = depth[id - from.id()];
      if (mine == kUnreached || d + 1 > mine) mine = d + 1;
    }
  }
  const std::size_t result = depth.back();
  if (result == kUnreached) return std::nullopt;
  return result;
}

void Graph::note_branch(std::uint64_t decision) noexcept {
  branch_signature_ = mix64(branch_signature_ ^ mix64(decision));
}

namespace ops {
namespace {

std::size_t broadcast_inner(const Shape& a, const Shape& b, std::string_view op) {
  bool ok = b.size() <= a.size() && std::equal(b.begin(), b.end(), a.end() - b.size());
  require(ok, ErrorCode::kShapeMismatch,
          std::string(op) + ": " + shape_string(a) + " vs " + shape_string(b));
  return element_count(b);
}

// Output offset of every input element when `axes` are reduced away.
std::vector<std::size_t> reduction_map(const Shape& shape, const std::vector<bool>& reduced) {
  const std::size_t rank = shape.size();
  std::vector<std::size_t> out_stride(rank, 0);
  std::size_t stride = 1;
  for (std::size_t k = rank; k-- > 0;) {
    if (reduced[k]) continue;
    out_stride[k] = stride;
    stride *= shape[k];
  }
  std::vector<std::size_t> map(element_count(shape));
  std::vector<std::size_t> index(rank, 0);
  std::size_t out = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    map[i] = out;
    for (std::size_t k = rank; k-- > 0;) {
      ++index[k];
      out += out_stride[k];
      if (index[k] < shape[k]) break;
      out -= out_stride[k] * index[k];
      index[k] = 0;
    }
  }
  return map;
}

struct ReductionPlan {
  Shape out_shape;
  std::vector<std::size_t> map;
  std::size_t group = 1;
};

ReductionPlan plan_reduction(const Shape& shape, std::vector<std::size_t> axes) {
  std::vector<bool> reduced(shape.size(), false);
  for (std::size_t axis : axes) {
    require(axis < shape.size(), ErrorCode::kShapeMismatch,
            "reduction axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
    reduced[axis] = true;
  }
  ReductionPlan plan;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (reduced[k]) {
      plan.group *= shape[k];
    } else {
      plan.out_shape.push_back(shape[k]);
    }
  }
  plan.map = reduction_map(shape, reduced);
  return plan;
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t k = 0; k < axis; ++k) s.outer *= shape[k];
  s.extent = shape[axis];
  for (std::size_t k = axis + 1; k < shape.size(); ++k) s.inner *= shape[k];
  return s;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename Forward, typename Derivative>
Var unary(Var a, OpKind kind, Forward forward, Derivative derivative) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  return a.graph().record(kind, {a.id()}, std::move(y), [derivative](const BackwardContext& ctx) {
    Tensor& gx = *ctx.input_grads[0];
    const Tensor& x = ctx.input(0);
    const Tensor& y = ctx.output;
    const Tensor& g = ctx.grad_output;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * derivative(x[i], y[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  const std::size_t inner = broadcast_inner(a.shape(), b.shape(), "add");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i % inner];
  return a.graph().record(OpKind::kAdd, {a.id(), b.id()}, std::move(y),
                          [inner](const BackwardContext& ctx) {
                            const Tensor& g = ctx.grad_output;
                            if (Tensor* ga = ctx.input_grads[0]) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
                            }
                            if (Tensor* gb = ctx.input_grads[1]) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i % inner] += g[i];
                            }
                          });
}

Var sub(Var a, Var b) {
  const std::size_t inner = broadcast_inner(a.shape(), b.shape(), "sub");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i % inner];
  return a.graph().record(OpKind::kSub, {a.id(), b.id()}, std::move(y),
                          [inner](const BackwardContext& ctx) {
                            const Tensor& g = ctx.grad_output;
                            if (Tensor* ga = ctx.input_grads[0]) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
                            }
                            if (Tensor* gb = ctx.input_grads[1]) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i % inner] -= g[i];
                            }
                          });
}

Var mul(Var a, Var b) {
  const std::size_t inner = broadcast_inner(a.shape(), b.shape(), "mul");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i % inner];
  return a.graph().record(OpKind::kMul, {a.id(), b.id()}, std::move(y),
                          [inner](const BackwardContext& ctx) {
                            const Tensor& g = ctx.grad_output;
                            const Tensor& av = ctx.input(0);
                            const Tensor& bv = ctx.input(1);
                            if (Tensor* ga = ctx.input_grads[0]) {
                              for (std::size_t i = 0; i < g.size(); ++i) {
                                (*ga)[i] += g[i] * bv[i % inner];
                              }
                            }
                            if (Tensor* gb = ctx.input_grads[1]) {
                              for (std::size_t i = 0; i < g.size(); ++i) {
                                (*gb)[i % inner] += g[i] * av[i];
                              }
                            }
                          });
}

Var scale(Var a, double factor) {
  Tensor y = a.value();
  for (double& v : y.values()) v *= factor;
  return a.graph().record(OpKind::kScale, {a.id()}, std::move(y),
                          [factor](const BackwardContext& ctx) {
                            const Tensor& g = ctx.grad_output;
                            Tensor& gx = *ctx.input_grads[0];
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
                          });
}

Var matmul(Var a, Var b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  require(as.size() == 2 && bs.size() == 2 && as[1] == bs[0], ErrorCode::kShapeMismatch,
          "matmul: " + shape_string(as) + " x " + shape_string(bs));
  const std::size_t m = as[0], k = as[1], n = bs[1];
  Tensor y(Shape{m, n}, 0.0);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) y[i * n + j] += aip * bv[p * n + j];
    }
  }
  return a.graph().record(OpKind::kMatmul, {a.id(), b.id()}, std::move(y),
                          [m, k, n](const BackwardContext& ctx) {
                            const Tensor& g = ctx.grad_output;
                            const Tensor& av = ctx.input(0);
                            const Tensor& bv = ctx.input(1);
                            if (Tensor* ga = ctx.input_grads[0]) {
                              for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t p = 0; p < k; ++p) {
                                  double acc = 0.0;
                                  for (std::size_t j = 0; j < n; ++j) {
                                    acc += g[i * n + j] * bv[p * n + j];
                                  }
                                  (*ga)[i * k + p] += acc;
                                }
                              }
                            }
                            if (Tensor* gb = ctx.input_grads[1]) {
                              for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t p = 0; p < k; ++p) {
                                  const double aip = av[i * k + p];
                                  for (std::size_t j = 0; j < n; ++j) {
                                    (*gb)[p * n + j] += aip * g[i * n + j];
                                  }
                                }
                              }
                            }
                          });
}

Var sigmoid(Var a) {
  return unary(
      a, OpKind::kSigmoid, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      a, OpKind::kTanh, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  Graph& graph = a.graph();
  if (graph.track_branches()) {
    std::uint64_t pattern = 0x243F6A8885A308D3ull;
    for (double x : a.value().values()) pattern = pattern * 1099511628211ull + (x > 0.0 ? 1 : 2);
    graph.note_branch(pattern);
  }
  return unary(
      a, OpKind::kRelu, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  require(!parts.empty(), ErrorCode::kEmptyInput, "concat of zero tensors");
  Graph& graph = parts[0].graph();
  const Shape& first = parts[0].shape();
  require(axis < first.size(), ErrorCode::kShapeMismatch, "concat axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<NodeId> inputs;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t k = 0; ok && k < s.size(); ++k) ok = (k == axis) || s[k] == first[k];
    require(ok, ErrorCode::kShapeMismatch,
            "concat: " + shape_string(first) + " vs " + shape_string(s));
    out_shape[axis] += s[axis];
    inputs.push_back(p.id());
    widths.push_back(split_at(s, axis).extent * split_at(s, axis).inner);
  }
  const AxisSplit split = split_at(out_shape, axis);
  const std::size_t row = split.extent * split.inner;
  Tensor y(out_shape);
  std::size_t column = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(v.values().begin() + o * widths[p], widths[p],
                  y.values().begin() + o * row + column);
    }
    column += widths[p];
  }
  return graph.record(OpKind::kConcat, std::move(inputs), std::move(y),
                      [widths, split, row](const BackwardContext& ctx) {
                        const Tensor& g = ctx.grad_output;
                        std::size_t column = 0;
                        for (std::size_t p = 0; p < widths.size(); ++p) {
                          if (Tensor* gp = ctx.input_grads[p]) {
                            for (std::size_t o = 0; o < split.outer; ++o) {
                              for (std::size_t i = 0; i < widths[p]; ++i) {
                                (*gp)[o * widths[p] + i] += g[o * row + column + i];
                              }
                            }
                          }
                          column += widths[p];
                        }
                      });
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  require(axis < s.size(), ErrorCode::kShapeMismatch, "slice axis out of range");
  require(begin < end && end <= s[axis], ErrorCode::kShapeMismatch,
          "slice range [" + std::to_string(begin) + ", " + std::to_string(end) + ") on extent " +
              std::to_string(s[axis]));
  const AxisSplit split = split_at(s, axis);
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  const std::size_t in_row = split.extent * split.inner;
  const std::size_t out_row = (end - begin) * split.inner;
  const std::size_t skip = begin * split.inner;
  Tensor y(out_shape);
  const Tensor& x = a.value();
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(x.values().begin() + o * in_row + skip, out_row, y.values().begin() + o * out_row);
  }
  return a.graph().record(OpKind::kSlice, {a.id()}, std::move(y),
                          [split, in_row, out_row, skip](const BackwardContext& ctx) {
                            const Tensor& g = ctx.grad_output;
                            Tensor& gx = *ctx.input_grads[0];
                            for (std::size_t o = 0; o < split.outer; ++o) {
                              for (std::size_t i = 0; i < out_row; ++i) {
                                gx[o * in_row + skip + i] += g[o * out_row + i];
                              }
                            }
                          });
}

Var reduce_mean(Var a, std::vector<std::size_t> axes) {
  ReductionPlan plan = plan_reduction(a.shape(), std::move(axes));
  Tensor y(plan.out_shape, 0.0);
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) y[plan.map[i]] += x[i];
  const double inv = 1.0 / static_cast<double>(plan.group);
  for (double& v : y.values()) v *= inv;
  return a.graph().record(OpKind::kReduceMean, {a.id()}, std::move(y),
                          [map = std::move(plan.map), inv](const BackwardContext& ctx) {
                            const Tensor& g = ctx.grad_output;
                            Tensor& gx = *ctx.input_grads[0];
                            for (std::size_t i = 0; i < map.size(); ++i) gx[i] += g[map[i]] * inv;
                          });
}

Var reduce_max(Var a, std::vector<std::size_t> axes) {
  ReductionPlan plan = plan_reduction(a.shape(), std::move(axes));
  Tensor y(plan.out_shape, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> argmax(y.size(), 0);
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t o = plan.map[i];
    if (x[i] > y[o]) {
      y[o] = x[i];
      argmax[o] = i;
    }
  }
  Graph& graph = a.graph();
  if (graph.track_branches()) {
    std::uint64_t pattern = 0x13198A2E03707344ull;
    for (std::size_t i : argmax) pattern = pattern * 1099511628211ull + i;
    graph.note_branch(pattern);
  }
  return graph.record(OpKind::kReduceMax, {a.id()}, std::move(y),
                      [argmax = std::move(argmax)](const BackwardContext& ctx) {
                        const Tensor& g = ctx.grad_output;
                        Tensor& gx = *ctx.input_grads[0];
                        for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += g[o];
                      });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return a.graph().record(OpKind::kSum, {a.id()}, Tensor::scalar(total),
                          [](const BackwardContext& ctx) {
                            const double g = ctx.grad_output[0];
                            for (double& v : ctx.input_grads[0]->values()) v += g;
                          });
}

Var softmax(Var a, std::size_t axis) {
  require(axis < a.rank(), ErrorCode::kShapeMismatch, "softmax axis out of range");
  const AxisSplit s = split_at(a.shape(), axis);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.extent; ++k) peak = std::max(peak, x[base + k * s.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < s.extent; ++k) {
        const double e = std::exp(x[base + k * s.inner] - peak);
        y[base + k * s.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < s.extent; ++k) y[base + k * s.inner] /= total;
    }
  }
  return a.graph().record(OpKind::kSoftmax, {a.id()}, std::move(y), [s](const BackwardContext& ctx) {
    const Tensor& g = ctx.grad_output;
    const Tensor& y = ctx.output;
    Tensor& gx = *ctx.input_grads[0];
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        double dot = 0.0;
        for (std::size_t k = 0; k < s.extent; ++k) {
          dot += g[base + k * s.inner] * y[base + k * s.inner];
        }
        for (std::size_t k = 0; k < s.extent; ++k) {
          const std::size_t at = base + k * s.inner;
          gx[at] += y[at] * (g[at] - dot);
        }
      }
    }
  });
}

Var log_softmax(Var a, std::size_t axis) {
  require(axis < a.rank(), ErrorCode::kShapeMismatch, "log_softmax axis out of range");
  const AxisSplit s = split_at(a.shape(), axis);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.extent; ++k) peak = std::max(peak, x[base + k * s.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < s.extent; ++k) total += std::exp(x[base + k * s.inner] - peak);
      const double lse = peak + std::log(total);
      for (std::size_t k = 0; k < s.extent; ++k) {
        y[base + k * s.inner] = x[base + k * s.inner] - lse;
      }
    }
  }
  return a.graph().record(
      OpKind::kLogSoftmax, {a.id()}, std::move(y), [s](const BackwardContext& ctx) {
        const Tensor& g = ctx.grad_output;
        const Tensor& y = ctx.output;
        Tensor& gx = *ctx.input_grads[0];
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.extent * s.inner + i;
            double total = 0.0;
            for (std::size_t k = 0; k < s.extent; ++k) total += g[base + k * s.inner];
            for (std::size_t k = 0; k < s.extent; ++k) {
              const std::size_t at = base + k * s.inner;
              gx[at] += g[at] - std::exp(y[at]) * total;
            }
          }
        }
      });
}

Var pad(Var a, std::vector<std::size_t> before, std::vector<std::size_t> after) {
  const Shape& s = a.shape();
  require(before.size() == s.size() && after.size() == s.size(), ErrorCode::kShapeMismatch,
          "pad widths must match rank");
  Shape out_shape(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) out_shape[k] = s[k] + before[k] + after[k];
  std::vector<std::size_t> out_stride(s.size(), 1);
  for (std::size_t k = s.size(); k-- > 1;) out_stride[k - 1] = out_stride[k] * out_shape[k];
  std::size_t origin = 0;
  for (std::size_t k = 0; k < s.size(); ++k) origin += before[k] * out_stride[k];

  const Tensor& x = a.value();
  std::vector<std::size_t> map(x.size());
  std::vector<std::size_t> index(s.size(), 0);
  std::size_t out = origin;
  for (std::size_t i = 0; i < x.size(); ++i) {
    map[i] = out;
    for (std::size_t k = s.size(); k-- > 0;) {
      ++index[k];
      out += out_stride[k];
      if (index[k] < s[k]) break;
      out -= out_stride[k] * index[k];
      index[k] = 0;
    }
  }
  Tensor y(out_shape, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) y[map[i]] = x[i];
  return a.graph().record(OpKind::kPad, {a.id()}, std::move(y),
                          [map = std::move(map)](const BackwardContext& ctx) {
                            const Tensor& g = ctx.grad_output;
                            Tensor& gx = *ctx.input_grads[0];
                            for (std::size_t i = 0; i < map.size(); ++i) gx[i] += g[map[i]];
                          });
}

Var reshape(Var a, Shape shape) {
  Tensor y = a.value().reshaped(std::move(shape));
  return a.graph().record(OpKind::kReshape, {a.id()}, std::move(y),
                          [](const BackwardContext& ctx) {
                            const Tensor& g = ctx.grad_output;
                            Tensor& gx = *ctx.input_grads[0];
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                          });
}

}  // namespace ops
}  // namespace ssrc
