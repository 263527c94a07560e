#include "ssrc/cgru.hpp"

#include <algorithm>
#include <vector>

#include "ssrc/error.hpp"
#include "ssrc/nn.hpp"

namespace ssrc {

Aggregation parse_aggregation(std::string_view name) {
  if (name == "last") return Aggregation::kLast;
  if (name == "mean") return Aggregation::kMean;
  if (name == "max") return Aggregation::kMax;
  fail(ErrorCode::kUnknownMode, "unknown aggregation mode '" + std::string(name) + "'");
}

std::string_view to_string(Aggregation mode) {
  switch (mode) {
    case Aggregation::kLast: return "last";
    case Aggregation::kMean: return "mean";
    case Aggregation::kMax: return "max";
  }
  return "unknown";
}

namespace {

Var gate_conv(Var x, Var kernel, Var bias) { return nn::conv2d(x, nn::Conv2dParams{kernel, bias}); }

}  // namespace

Var cgru_cell_step(Var x_t, Var h_prev, const CgruParams& p) {
  require(x_t.rank() == 4 && h_prev.rank() == 4, ErrorCode::kShapeMismatch,
          "cell inputs must be B x H x W x C");
  const Shape& xs = x_t.shape();
  const Shape& hs = h_prev.shape();
  require(xs[0] == hs[0] && xs[1] == hs[1] && xs[2] == hs[2], ErrorCode::kShapeMismatch,
          "input " + shape_string(xs) + " and state " + shape_string(hs) + " disagree");
  require(hs[3] == p.hidden(), ErrorCode::kShapeMismatch, "state channels differ from hidden dim");

  Var z = ops::sigmoid(ops::add(gate_conv(x_t, p.w_z, p.b_z), gate_conv(h_prev, p.u_z, Var{})));
  Var r = ops::sigmoid(ops::add(gate_conv(x_t, p.w_r, p.b_r), gate_conv(h_prev, p.u_r, Var{})));
  Var candidate = ops::tanh(
      ops::add(gate_conv(x_t, p.w_h, p.b_h), gate_conv(ops::mul(r, h_prev), p.u_h, Var{})));
  // h_prev + z ⊙ (h~ - h_prev) == (1 - z) ⊙ h_prev + z ⊙ h~
  return ops::add(h_prev, ops::mul(z, ops::sub(candidate, h_prev)));
}

SpectralStates cgru_scan(Var x, const CgruParams& p, ScanDirection direction) {
  require(x.rank() == 5, ErrorCode::kShapeMismatch,
          "scan input must be B x H x W x S x C, got " + shape_string(x.shape()));
  const Shape& s = x.shape();
  const std::size_t bands = s[3];
  const std::size_t hidden = p.hidden();
  Graph& graph = x.graph();

  Var h = graph.constant(Tensor(Shape{s[0], s[1], s[2], hidden}, 0.0));
  std::vector<Var> states(bands);
  for (std::size_t step = 0; step < bands; ++step) {
    const std::size_t band = direction == ScanDirection::kForward ? step : bands - 1 - step;
    Var x_t = ops::reshape(ops::slice(x, 3, band, band + 1), Shape{s[0], s[1], s[2], s[4]});
    h = cgru_cell_step(x_t, h, p);
    states[band] = ops::reshape(h, Shape{s[0], s[1], s[2], 1, hidden});
  }
  Var stacked = bands == 1 ? states[0] : ops::concat(states, 3);
  return SpectralStates{stacked, {{hidden, direction}}};
}

SpectralStates bidirectional_cgru(Var x, const CgruParams& forward, const CgruParams& backward) {
  SpectralStates f = cgru_scan(x, forward, ScanDirection::kForward);
  SpectralStates b = cgru_scan(x, backward, ScanDirection::kBackward);
  const Var parts[] = {f.states, b.states};
  SpectralStates out{ops::concat(parts, 4), f.groups};
  out.groups.insert(out.groups.end(), b.groups.begin(), b.groups.end());
  return out;
}

namespace {

// Mean over the band axis of B x H x W x S x C, computed as
// min + sum(x - min) / S with the differences summed in sorted order. The
// result does not depend on band order and equals x exactly when every band
// holds the same x; plain left-to-right summation guarantees neither.
Var band_mean(Var states) {
  const Shape& shape = states.shape();
  const std::size_t bands = shape[3], channels = shape[4];
  const std::size_t pixels = shape[0] * shape[1] * shape[2];
  const Tensor& x = states.value();
  Tensor y(Shape{shape[0], shape[1], shape[2], channels});
  std::vector<double> diffs(bands);
  for (std::size_t p = 0; p < pixels; ++p) {
    const double* base = x.data() + p * bands * channels;
    for (std::size_t c = 0; c < channels; ++c) {
      double lo = base[c];
      for (std::size_t s = 1; s < bands; ++s) lo = std::min(lo, base[s * channels + c]);
      for (std::size_t s = 0; s < bands; ++s) diffs[s] = base[s * channels + c] - lo;
      std::sort(diffs.begin(), diffs.end());
      double sum = 0.0;
      for (double d : diffs) sum += d;
      y[p * channels + c] = lo + sum / static_cast<double>(bands);
    }
  }
  const double inv = 1.0 / static_cast<double>(bands);
  return states.graph().record(OpKind::kReduceMean, {states.id()}, std::move(y),
                               [pixels, bands, channels, inv](const BackwardContext& ctx) {
                                 Tensor* gx = ctx.input_grads[0];
                                 if (gx == nullptr) return;
                                 const Tensor& g = ctx.grad_output;
                                 for (std::size_t p = 0; p < pixels; ++p)
                                   for (std::size_t s = 0; s < bands; ++s)
                                     for (std::size_t c = 0; c < channels; ++c)
                                       (*gx)[(p * bands + s) * channels + c] += g[p * channels + c] * inv;
                               });
}

}  // namespace

Var select_state(const SpectralStates& s, Aggregation mode) {
  const Shape& shape = s.states.shape();
  require(shape.size() == 5, ErrorCode::kShapeMismatch, "states must be B x H x W x S x C");
  const std::size_t bands = shape[3];
  switch (mode) {
    case Aggregation::kMean:
      return band_mean(s.states);
    case Aggregation::kMax:
      return ops::reduce_max(s.states, {3});
    case Aggregation::kLast: {
      std::vector<SpectralStates::Group> groups = s.groups;
      if (groups.empty()) groups.push_back({shape[4], ScanDirection::kForward});
      std::vector<Var> parts;
      std::size_t offset = 0;
      for (const auto& group : groups) {
        Var channels = groups.size() == 1
                           ? s.states
                           : ops::slice(s.states, 4, offset, offset + group.channels);
        const std::size_t band = group.direction == ScanDirection::kForward ? bands - 1 : 0;
        Var final_state = bands == 1 ? channels : ops::slice(channels, 3, band, band + 1);
        parts.push_back(
            ops::reshape(final_state, Shape{shape[0], shape[1], shape[2], group.channels}));
        offset += group.channels;
      }
      return parts.size() == 1 ? parts[0] : ops::concat(parts, 3);
    }
  }
  fail(ErrorCode::kUnknownMode, "unknown aggregation mode");
}

}  // namespace ssrc
