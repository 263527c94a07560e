#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ssrc/autograd.hpp"

namespace ssrc {

enum class ScanDirection { kForward, kBackward };

/// State aggregation over the band axis.
enum class Aggregation { kLast, kMean, kMax };

Aggregation parse_aggregation(std::string_view name);
std::string_view to_string(Aggregation mode);

/// Gate kernels of a convolutional GRU: W_* are k x k x C_in x N_C, U_* are
/// k x k x N_C x N_C, b_* are N_C.
struct CgruParams {
  Var w_z, w_r, w_h;
  Var u_z, u_r, u_h;
  Var b_z, b_r, b_h;

  std::size_t hidden() const { return b_z.extent(0); }
};

/// Hidden states stacked in input band order: B x H x W x S x C. `groups`
/// records which channel ranges came from which scan direction, so "last"
/// can pick the final state of each direction.
struct SpectralStates {
  struct Group {
    std::size_t channels;
    ScanDirection direction;
  };

  Var states;
  std::vector<Group> groups;
};

/// z = σ(W_z*x + U_z*h + b_z), r = σ(W_r*x + U_r*h + b_r),
/// h~ = tanh(W_h*x + U_h*(r ⊙ h) + b_h), h' = (1 - z) ⊙ h + z ⊙ h~.
Var cgru_cell_step(Var x_t, Var h_prev, const CgruParams& p);

/// Runs the cell over the band axis (axis 3) of B x H x W x S x C_in from a
/// zero state. Backward scans start at the highest band; the output is always
/// stacked in input band order.
SpectralStates cgru_scan(Var x, const CgruParams& p, ScanDirection direction);

/// Forward and backward scans concatenated along the hidden-channel axis.
SpectralStates bidirectional_cgru(Var x, const CgruParams& forward, const CgruParams& backward);

/// Reduces B x H x W x S x C states to B x H x W x C.
Var select_state(const SpectralStates& s, Aggregation mode);

}  // namespace ssrc
