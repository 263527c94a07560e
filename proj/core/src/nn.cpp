#include "ssrc/nn.hpp"

#include <algorithm>

#include "ssrc/error.hpp"

namespace ssrc::nn {
namespace {

// Convolution over three spatial axes; 2D maps are handled with a unit third
// axis, which leaves the memory layout unchanged.
struct ConvGeometry {
  std::size_t batch = 1;
  std::array<std::size_t, 3> in{1, 1, 1};
  std::array<std::size_t, 3> kernel{1, 1, 1};
  std::array<std::size_t, 3> stride{1, 1, 1};
  std::array<std::size_t, 3> pad{0, 0, 0};
  std::array<std::size_t, 3> out{1, 1, 1};
  std::size_t c_in = 1;
  std::size_t c_out = 1;
};

void resolve_output(ConvGeometry& g, Padding padding) {
  for (int a = 0; a < 3; ++a) {
    require(g.stride[a] >= 1, ErrorCode::kInvalidArgument, "convolution stride must be >= 1");
    if (padding == Padding::kSame) {
      require(g.kernel[a] % 2 == 1, ErrorCode::kInvalidArgument,
              "same padding requires odd kernel extents");
      g.pad[a] = (g.kernel[a] - 1) / 2;
    } else {
      g.pad[a] = 0;
    }
    const std::size_t padded = g.in[a] + 2 * g.pad[a];
    require(g.kernel[a] <= padded, ErrorCode::kKernelTooLarge,
            "kernel extent " + std::to_string(g.kernel[a]) + " exceeds padded input " +
                std::to_string(padded));
    g.out[a] = (padded - g.kernel[a]) / g.stride[a] + 1;
  }
}

Var conv_primitive(Var x, Var kernel, Var bias, const ConvGeometry& geo, Shape out_shape) {
  Tensor y(std::move(out_shape), 0.0);
  const Tensor& xv = x.value();
  const Tensor& wv = kernel.value();
  const std::size_t cin = geo.c_in;
  const std::size_t cout = geo.c_out;

  // Visits every (output cell, kernel tap) pair with an in-bounds input cell.
  auto for_each_tap = [geo](auto&& visit) {
    const auto [D1, D2, D3] = geo.in;
    const auto [K1, K2, K3] = geo.kernel;
    const auto [O1, O2, O3] = geo.out;
    std::size_t out_cell = 0;
    for (std::size_t b = 0; b < geo.batch; ++b) {
      for (std::size_t o1 = 0; o1 < O1; ++o1) {
        for (std::size_t o2 = 0; o2 < O2; ++o2) {
          for (std::size_t o3 = 0; o3 < O3; ++o3, ++out_cell) {
            for (std::size_t k1 = 0; k1 < K1; ++k1) {
              const std::ptrdiff_t i1 = static_cast<std::ptrdiff_t>(o1 * geo.stride[0] + k1) -
                                        static_cast<std::ptrdiff_t>(geo.pad[0]);
              if (i1 < 0 || i1 >= static_cast<std::ptrdiff_t>(D1)) continue;
              for (std::size_t k2 = 0; k2 < K2; ++k2) {
                const std::ptrdiff_t i2 = static_cast<std::ptrdiff_t>(o2 * geo.stride[1] + k2) -
                                          static_cast<std::ptrdiff_t>(geo.pad[1]);
                if (i2 < 0 || i2 >= static_cast<std::ptrdiff_t>(D2)) continue;
                for (std::size_t k3 = 0; k3 < K3; ++k3) {
                  const std::ptrdiff_t i3 = static_cast<std::ptrdiff_t>(o3 * geo.stride[2] + k3) -
                                            static_cast<std::ptrdiff_t>(geo.pad[2]);
                  if (i3 < 0 || i3 >= static_cast<std::ptrdiff_t>(D3)) continue;
                  const std::size_t in_cell =
                      ((b * D1 + static_cast<std::size_t>(i1)) * D2 + static_cast<std::size_t>(i2)) *
                          D3 +
                      static_cast<std::size_t>(i3);
                  const std::size_t tap = (k1 * K2 + k2) * K3 + k3;
                  visit(out_cell, in_cell, tap);
                }
              }
            }
          }
        }
      }
    }
  };

  const std::size_t cells = y.size() / cout;
  if (bias.valid()) {
    const Tensor& bv = bias.value();
    for (std::size_t c = 0; c < cells; ++c) std::copy_n(bv.values().begin(), cout, y.data() + (c * cout));
  }
  for_each_tap([&](std::size_t out_cell, std::size_t in_cell, std::size_t tap) {
    double* out = y.data() + (out_cell * cout);
    const double* in = xv.data() + (in_cell * cin);
    const double* w = wv.data() + (tap * cin * cout);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double xi = in[ci];
      const double* wr = w + ci * cout;
      for (std::size_t co = 0; co < cout; ++co) out[co] += xi * wr[co];
    }
  });

  std::vector<NodeId> inputs{x.id(), kernel.id()};
  if (bias.valid()) inputs.push_back(bias.id());
  return x.graph().record(
      OpKind::kConv, std::move(inputs), std::move(y),
      [for_each_tap, cin, cout, cells](const BackwardContext& ctx) {
        const Tensor& g = ctx.grad_output;
        const Tensor& xv = ctx.input(0);
        const Tensor& wv = ctx.input(1);
        Tensor* gx = ctx.input_grads[0];
        Tensor* gw = ctx.input_grads[1];
        if (ctx.input_grads.size() > 2 && ctx.input_grads[2] != nullptr) {
          Tensor& gb = *ctx.input_grads[2];
          for (std::size_t c = 0; c < cells; ++c) {
            for (std::size_t co = 0; co < cout; ++co) gb[co] += g[c * cout + co];
          }
        }
        if (gx == nullptr && gw == nullptr) return;
        for_each_tap([&](std::size_t out_cell, std::size_t in_cell, std::size_t tap) {
          const double* go = g.data() + (out_cell * cout);
          if (gx != nullptr) {
            double* gi = gx->data() + (in_cell * cin);
            const double* w = wv.data() + (tap * cin * cout);
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double* wr = w + ci * cout;
              double acc = 0.0;
              for (std::size_t co = 0; co < cout; ++co) acc += go[co] * wr[co];
              gi[ci] += acc;
            }
          }
          if (gw != nullptr) {
            const double* in = xv.data() + (in_cell * cin);
            double* gwt = gw->data() + (tap * cin * cout);
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double xi = in[ci];
              double* gr = gwt + ci * cout;
              for (std::size_t co = 0; co < cout; ++co) gr[co] += xi * go[co];
            }
          }
        });
      });
}

void check_bias(Var bias, std::size_t c_out) {
  if (!bias.valid()) return;
  require(bias.rank() == 1 && bias.extent(0) == c_out, ErrorCode::kShapeMismatch,
          "bias shape " + shape_string(bias.shape()) + " for " + std::to_string(c_out) +
              " output channels");
}

Var pool_primitive(Var x, std::size_t batch, std::array<std::size_t, 3> in,
                   std::array<std::size_t, 3> factor, std::size_t channels, Shape out_shape) {
  std::array<std::size_t, 3> out{};
  for (int a = 0; a < 3; ++a) {
    require(in[a] >= factor[a], ErrorCode::kExtentTooSmall,
            "extent " + std::to_string(in[a]) + " cannot be pooled by " +
                std::to_string(factor[a]));
    out[a] = in[a] / factor[a];
  }
  const double inv = 1.0 / static_cast<double>(factor[0] * factor[1] * factor[2]);
  // Source cell for each (output cell, window offset), flattened.
  std::vector<std::size_t> sources;
  sources.reserve(batch * out[0] * out[1] * out[2] * factor[0] * factor[1] * factor[2]);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o1 = 0; o1 < out[0]; ++o1) {
      for (std::size_t o2 = 0; o2 < out[1]; ++o2) {
        for (std::size_t o3 = 0; o3 < out[2]; ++o3) {
          for (std::size_t w1 = 0; w1 < factor[0]; ++w1) {
            for (std::size_t w2 = 0; w2 < factor[1]; ++w2) {
              for (std::size_t w3 = 0; w3 < factor[2]; ++w3) {
                const std::size_t i1 = o1 * factor[0] + w1;
                const std::size_t i2 = o2 * factor[1] + w2;
                const std::size_t i3 = o3 * factor[2] + w3;
                sources.push_back(((b * in[0] + i1) * in[1] + i2) * in[2] + i3);
              }
            }
          }
        }
      }
    }
  }
  const std::size_t window = factor[0] * factor[1] * factor[2];
  Tensor y(std::move(out_shape), 0.0);
  const Tensor& xv = x.value();
  const std::size_t cells = y.size() / channels;
  for (std::size_t c = 0; c < cells; ++c) {
    double* dst = y.data() + (c * channels);
    for (std::size_t w = 0; w < window; ++w) {
      const double* src = xv.data() + sources[c * window + w] * channels;
      for (std::size_t ch = 0; ch < channels; ++ch) dst[ch] += src[ch];
    }
    for (std::size_t ch = 0; ch < channels; ++ch) dst[ch] *= inv;
  }
  return x.graph().record(
      OpKind::kAvgPool, {x.id()}, std::move(y),
      [sources = std::move(sources), window, channels, cells, inv](const BackwardContext& ctx) {
        const Tensor& g = ctx.grad_output;
        Tensor& gx = *ctx.input_grads[0];
        for (std::size_t c = 0; c < cells; ++c) {
          const double* go = g.data() + (c * channels);
          for (std::size_t w = 0; w < window; ++w) {
            double* gi = gx.data() + sources[c * window + w] * channels;
            for (std::size_t ch = 0; ch < channels; ++ch) gi[ch] += go[ch] * inv;
          }
        }
      });
}

}  // namespace

Var conv2d(Var x, const Conv2dParams& p) {
  require(x.rank() == 4, ErrorCode::kShapeMismatch,
          "conv2d expects B x H x W x C, got " + shape_string(x.shape()));
  require(p.kernel.rank() == 4, ErrorCode::kShapeMismatch,
          "conv2d kernel must be k_h x k_w x C_in x C_out");
  const Shape& xs = x.shape();
  const Shape& ks = p.kernel.shape();
  require(ks[2] == xs[3], ErrorCode::kChannelMismatch,
          "input has " + std::to_string(xs[3]) + " channels, kernel expects " +
              std::to_string(ks[2]));
  check_bias(p.bias, ks[3]);
  ConvGeometry geo;
  geo.batch = xs[0];
  geo.in = {xs[1], xs[2], 1};
  geo.kernel = {ks[0], ks[1], 1};
  geo.stride = {p.stride, p.stride, 1};
  geo.c_in = ks[2];
  geo.c_out = ks[3];
  resolve_output(geo, p.padding);
  return conv_primitive(x, p.kernel, p.bias, geo, Shape{xs[0], geo.out[0], geo.out[1], geo.c_out});
}

Var conv3d(Var x, const Conv3dParams& p) {
  require(x.rank() == 5, ErrorCode::kShapeMismatch,
          "conv3d expects B x H x W x S x C, got " + shape_string(x.shape()));
  require(p.kernel.rank() == 5, ErrorCode::kShapeMismatch,
          "conv3d kernel must be k_h x k_w x k_s x C_in x C_out");
  const Shape& xs = x.shape();
  const Shape& ks = p.kernel.shape();
  require(ks[3] == xs[4], ErrorCode::kChannelMismatch,
          "input has " + std::to_string(xs[4]) + " channels, kernel expects " +
              std::to_string(ks[3]));
  check_bias(p.bias, ks[4]);
  ConvGeometry geo;
  geo.batch = xs[0];
  geo.in = {xs[1], xs[2], xs[3]};
  geo.kernel = {ks[0], ks[1], ks[2]};
  geo.stride = p.stride;
  geo.c_in = ks[3];
  geo.c_out = ks[4];
  resolve_output(geo, p.padding);
  return conv_primitive(x, p.kernel, p.bias, geo,
                        Shape{xs[0], geo.out[0], geo.out[1], geo.out[2], geo.c_out});
}

Var avg_pool2d(Var x) {
  require(x.rank() == 4, ErrorCode::kShapeMismatch,
          "avg_pool2d expects B x H x W x C, got " + shape_string(x.shape()));
  const Shape& s = x.shape();
  require(s[1] >= 2 && s[2] >= 2, ErrorCode::kExtentTooSmall,
          "cannot pool spatial extents " + shape_string(s));
  return pool_primitive(x, s[0], {s[1], s[2], 1}, {2, 2, 1}, s[3],
                        Shape{s[0], s[1] / 2, s[2] / 2, s[3]});
}

Var avg_pool3d(Var x, bool pool_spectral) {
  require(x.rank() == 5, ErrorCode::kShapeMismatch,
          "avg_pool3d expects B x H x W x S x C, got " + shape_string(x.shape()));
  const Shape& s = x.shape();
  const std::size_t fs = pool_spectral ? 2 : 1;
  require(s[1] >= 2 && s[2] >= 2 && s[3] >= fs, ErrorCode::kExtentTooSmall,
          "cannot pool extents " + shape_string(s));
  return pool_primitive(x, s[0], {s[1], s[2], s[3]}, {2, 2, fs}, s[4],
                        Shape{s[0], s[1] / 2, s[2] / 2, s[3] / fs, s[4]});
}

Var dense_block(Var x, std::span<const DenseLayer> layers, int dims) {
  require(dims == 2 || dims == 3, ErrorCode::kInvalidArgument, "dense block dims must be 2 or 3");
  require(x.rank() == static_cast<std::size_t>(dims) + 2, ErrorCode::kShapeMismatch,
          "dense block input rank " + std::to_string(x.rank()) + " for " + std::to_string(dims) +
              "D block");
  std::vector<Var> features{x};
  const std::size_t channel_axis = x.rank() - 1;
  for (const DenseLayer& layer : layers) {
    Var joined = features.size() == 1 ? features[0] : ops::concat(features, channel_axis);
    Var activated = ops::relu(joined);
    Var out = dims == 2 ? conv2d(activated, Conv2dParams{layer.kernel, layer.bias})
                        : conv3d(activated, Conv3dParams{layer.kernel, layer.bias});
    features.push_back(out);
  }
  return features.size() == 1 ? features[0] : ops::concat(features, channel_axis);
}

Var global_average_pool(Var x) {
  require(x.rank() >= 3, ErrorCode::kShapeMismatch,
          "global pooling expects B x ... x C, got " + shape_string(x.shape()));
  std::vector<std::size_t> axes;
  for (std::size_t a = 1; a + 1 < x.rank(); ++a) axes.push_back(a);
  return ops::reduce_mean(x, std::move(axes));
}

Var classifier_head(Var x, Var weight, Var bias) {
  Var pooled = x.rank() == 2 ? x : global_average_pool(x);
  return ops::add(ops::matmul(pooled, weight), bias);
}

std::array<double, 2> class_weights(std::array<std::size_t, 2> counts) {
  require(counts[0] >= 1 && counts[1] >= 1, ErrorCode::kEmptyClass,
          "class counts " + std::to_string(counts[0]) + "/" + std::to_string(counts[1]));
  const double total = static_cast<double>(counts[0] + counts[1]);
  return {total / static_cast<double>(counts[0]), total / static_cast<double>(counts[1])};
}

Var weighted_cross_entropy(Var logits, std::span<const int> labels,
                           std::array<std::size_t, 2> class_counts) {
  require(logits.rank() == 2 && logits.extent(1) == 2, ErrorCode::kShapeMismatch,
          "logits must be B x 2, got " + shape_string(logits.shape()));
  const std::size_t batch = logits.extent(0);
  require(labels.size() == batch, ErrorCode::kShapeMismatch, "one label per logit row required");
  const auto w = class_weights(class_counts);
  Tensor selector(Shape{batch, 2}, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    require(labels[b] == 0 || labels[b] == 1, ErrorCode::kLabelOutOfRange,
            "label " + std::to_string(labels[b]));
    const auto y = static_cast<std::size_t>(labels[b]);
    selector[b * 2 + y] = w[y] / static_cast<double>(batch);
  }
  Graph& g = logits.graph();
  Var picked = ops::mul(ops::log_softmax(logits, 1), g.constant(std::move(selector)));
  return ops::scale(ops::sum(picked), -1.0);
}

}  // namespace ssrc::nn
