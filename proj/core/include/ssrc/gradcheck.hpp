#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ssrc/autograd.hpp"

namespace ssrc {

using ScalarFunction = std::function<double(const Tensor&)>;

/// Central differences: [f(x + h e_i) - f(x - h e_i)] / 2h for every coordinate.
Tensor finite_difference_grad(const ScalarFunction& f, const Tensor& x, double h = 1e-5);

/// |a - n| / max(|a|, |n|, floor). The floor keeps vanishing gradients from
/// turning rounding noise into large relative errors.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// A differentiable computation under test: maps graph inputs to one output.
using GraphFunction = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  double floor = 1e-6;
  /// Coordinates probed per input; 0 probes all of them.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_error = 0.0;
  std::size_t checked = 0;
  /// Probes whose ±h evaluations crossed a relu/max switching point.
  std::size_t skipped = 0;
  bool passed = true;
  std::string worst;
};

/// Compares reverse-mode gradients of sum(fn(inputs) * R), R a fixed random
/// projection, with central differences on each input.
GradCheckResult check_gradients(const GraphFunction& fn, std::span<const Tensor> inputs,
                                const GradCheckOptions& options);

}  // namespace ssrc
