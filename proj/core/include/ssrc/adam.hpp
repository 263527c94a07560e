#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ssrc/tensor.hpp"

namespace ssrc {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for a fixed list of parameters.
struct AdamState {
  AdamState() = default;
  AdamState(std::span<const Tensor> params, AdamOptions opts);

  AdamOptions options;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam update. lr = 0 leaves parameters untouched (the
/// moments still advance); a negative lr is rejected.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace ssrc
