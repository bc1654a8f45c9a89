#pragma once

#include <string>
#include <vector>

#include "brpsnn/layers.hpp"
#include "brpsnn/learn.hpp"

namespace brpsnn {

// Everything training mutates, bundled for persistence.
struct TrainState {
  Network net;
  Feedback fb;
  std::vector<AdamState> opt;  // parallel to net.learnable
};

// Binary checkpoint, little-endian throughout:
//   magic "BRPSNN01"
//   u32 topology length + bytes
//   u32 input shape {C, H, W}
//   u32 learnable-layer count
//   per layer: u32 ndims, u32 dims[], f32 weights (row-major)
//   per layer: u32 ndims, u32 dims[], f32 feedback (ndims=0 for the output
//              layer, whose routing is identity)
//   per layer: u64 step count, f64 m[], f64 v[] (same element count as W)
//   u32 CRC32 of all preceding bytes
void save_checkpoint(const TrainState& st, const std::string& path);

// Rebuilds the network from the stored topology and input shape under the
// given neuron parameters, then restores weights, feedback, and optimizer
// moments.  Stored dimensions must match the rebuilt structure.
TrainState load_checkpoint(const std::string& path, const LifParams& lif);

}  // namespace brpsnn
