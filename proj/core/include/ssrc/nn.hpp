#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "ssrc/autograd.hpp"

namespace ssrc::nn {

enum class Padding { kSame, kValid };

/// 2D convolution parameters bound to a graph. `kernel` is k_h x k_w x C_in x C_out;
/// `bias` (C_out) may be left invalid for a bias-free convolution.
struct Conv2dParams {
  Var kernel;
  Var bias;
  std::size_t stride = 1;
  Padding padding = Padding::kSame;
};

/// 3D variant; kernel is k_h x k_w x k_s x C_in x C_out.
struct Conv3dParams {
  Var kernel;
  Var bias;
  std::array<std::size_t, 3> stride{1, 1, 1};
  Padding padding = Padding::kSame;
};

/// Cross-correlation of a channels-last B x H x W x C_in map.
Var conv2d(Var x, const Conv2dParams& p);

/// Cross-correlation of a B x H x W x S x C_in volume.
Var conv3d(Var x, const Conv3dParams& p);

/// Non-overlapping 2x2 mean pooling of B x H x W x C.
Var avg_pool2d(Var x);

/// Mean pooling of B x H x W x S x C with window 2x2x2, or 2x2x1 when
/// `pool_spectral` is false.
Var avg_pool3d(Var x, bool pool_spectral = true);

struct DenseBlockConfig {
  std::size_t layers = 4;
  std::size_t growth = 12;
  std::size_t kernel = 3;
  int dims = 2;

  std::size_t output_channels(std::size_t input_channels) const {
    return input_channels + layers * growth;
  }
};

/// One inner layer of a dense block: ReLU followed by a same-padded conv.
struct DenseLayer {
  Var kernel;
  Var bias;
};

/// Each layer consumes relu(concat(x, outputs of all previous layers)); the
/// block returns concat(x, every layer output) along the channel axis.
Var dense_block(Var x, std::span<const DenseLayer> layers, int dims);

/// Global average over all axes except batch and channel.
Var global_average_pool(Var x);

/// Global average pooling followed by an affine map to logits.
/// `weight` is C x K, `bias` K.
Var classifier_head(Var x, Var weight, Var bias);

/// w_i = N / N_i over the training class counts.
std::array<double, 2> class_weights(std::array<std::size_t, 2> counts);

/// (1/B) * sum_b w_{y_b} * -log softmax(logits_b)[y_b].
Var weighted_cross_entropy(Var logits, std::span<const int> labels,
                           std::array<std::size_t, 2> class_counts);

}  // namespace ssrc::nn
