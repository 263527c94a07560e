#include "ssrc/adam.hpp"

#include <cmath>

#include "ssrc/error.hpp"

namespace ssrc {

AdamState::AdamState(std::span<const Tensor> params, AdamOptions opts) : options(opts) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Tensor& p : params) {
    m.emplace_back(p.shape(), 0.0);
    v.emplace_back(p.shape(), 0.0);
  }
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state) {
  const AdamOptions& o = state.options;
  require(o.lr >= 0.0, ErrorCode::kInvalidArgument, "learning rate must be non-negative");
  require(params.size() == grads.size() && params.size() == state.m.size(),
          ErrorCode::kShapeMismatch, "parameter, gradient and state counts differ");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require(params[k].shape() == grads[k].shape() && params[k].shape() == state.m[k].shape(),
            ErrorCode::kShapeMismatch, "parameter " + std::to_string(k) + " shape mismatch");
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    const Tensor& g = grads[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      if (o.lr == 0.0) continue;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

}  // namespace ssrc
