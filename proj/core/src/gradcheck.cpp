#include "ssrc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ssrc/error.hpp"
#include "ssrc/rng.hpp"

namespace ssrc {

Tensor finite_difference_grad(const ScalarFunction& f, const Tensor& x, double h) {
  require(h > 0.0, ErrorCode::kInvalidArgument, "finite-difference step must be positive");
  Tensor grad(x.shape(), 0.0);
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    require(std::isfinite(up) && std::isfinite(down), ErrorCode::kNonFinite,
            "non-finite function value at probe " + std::to_string(i));
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

namespace {

struct Evaluation {
  double value;
  std::uint64_t signature;
};

Evaluation evaluate(const GraphFunction& fn, std::span<const Tensor> inputs, const Tensor& projection,
                    bool with_grad, std::vector<Tensor>* grads) {
  Graph graph;
  graph.set_track_branches(true);
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(graph.leaf(t, with_grad));
  Var out = fn(graph, vars);
  require(out.shape() == projection.shape(), ErrorCode::kShapeMismatch,
          "function output shape changed between evaluations");
  const std::uint64_t signature = graph.branch_signature();
  Var loss = ops::sum(ops::mul(out, graph.constant(projection)));
  if (with_grad) {
    Gradients g = graph.backward(loss);
    grads->clear();
    for (const Var& v : vars) {
      grads->push_back(g.has(v) ? g.of(v) : Tensor(v.shape(), 0.0));
    }
  }
  return {loss.value().item(), signature};
}

}  // namespace

GradCheckResult check_gradients(const GraphFunction& fn, std::span<const Tensor> inputs,
                                const GradCheckOptions& options) {
  Rng rng(derive_seed(options.seed, 0x9C));
  Tensor projection;
  {
    Graph probe_graph;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(probe_graph.constant(t));
    const Shape out_shape = fn(probe_graph, vars).shape();
    projection = Tensor(out_shape);
    for (double& v : projection.values()) v = rng.uniform(-1.0, 1.0);
  }

  std::vector<Tensor> analytic;
  const Evaluation base = evaluate(fn, inputs, projection, true, &analytic);

  GradCheckResult result;
  std::vector<Tensor> probe(inputs.begin(), inputs.end());
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const std::size_t n = probe[k].size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coordinates > 0 && options.max_coordinates < n) {
      rng.shuffle(coords);
      coords.resize(options.max_coordinates);
    }
    for (std::size_t i : coords) {
      const double original = probe[k][i];
      probe[k][i] = original + options.step;
      const Evaluation up = evaluate(fn, probe, projection, false, nullptr);
      probe[k][i] = original - options.step;
      const Evaluation down = evaluate(fn, probe, projection, false, nullptr);
      probe[k][i] = original;
      if (up.signature != base.signature || down.signature != base.signature) {
        ++result.skipped;
        continue;
      }
      const double numeric = (up.value - down.value) / (2.0 * options.step);
      const double err = relative_error(analytic[k][i], numeric, options.floor);
      ++result.checked;
      if (err > result.max_error) {
        result.max_error = err;
        result.worst = "input " + std::to_string(k) + " coord " + std::to_string(i) +
                       ": analytic " + std::to_string(analytic[k][i]) + " numeric " +
                       std::to_string(numeric);
      }
    }
  }
  result.passed = result.max_error <= options.tolerance && result.checked > 0;
  return result;
}

}  // namespace ssrc
