#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brpsnn/lif.hpp"
#include "brpsnn/rng.hpp"
#include "brpsnn/spike_train.hpp"
#include "brpsnn/topology.hpp"

namespace brpsnn {

// A built network: parsed layers with resolved shapes plus one weight tensor
// per learnable (conv/fc) layer.  Pool layers carry no weights.
//
// Weight layouts (32-bit floats, row-major):
//   conv:  w[((oc*inC + ic)*kh + ky)*kw + kx]
//   fc:    w[j*n_out + i]  -- input-major so a presynaptic spike touches one
//                             contiguous row, which keeps the spike-driven
//                             accumulation a straight vector add.
struct Network {
  std::string topology;
  std::array<int, 3> input_shape{0, 0, 0};
  std::vector<LayerSpec> layers;
  std::vector<std::vector<float>> weights;  // parallel to layers; empty for pool
  std::vector<int> learnable;               // indices of layers carrying weights
  LifParams lif;

  int num_classes() const { return layers.back().units; }
  size_t weight_count(int layer_idx) const;

  // Parses, resolves shapes and initializes weights uniformly in
  // (-gain/sqrt(fan_in), +gain/sqrt(fan_in)) from the weight-init stream.
  static Network build(const std::string& topology, std::array<int, 3> input_shape,
                       const LifParams& lif, double init_gain, uint64_t seed);
};

// Accumulates presynaptic contributions into `currents` (not zeroed here).
// Spikes are visited in ascending flat index and, per output unit, weights
// are added in ascending presynaptic order, so results match a plain
// ascending-index sum of the same float weights term for term.
void fc_currents(std::span<const float> w, int n_in, int n_out,
                 std::span<const uint8_t> in_spikes, std::span<float> currents);

void conv_currents(const LayerSpec& spec, std::span<const float> w,
                   std::span<const uint8_t> in_spikes, std::span<float> currents);

// OR-pool over k x k windows with stride k; rows/cols beyond the last full
// window are dropped (floor semantics).
void pool_spikes(const LayerSpec& spec, std::span<const uint8_t> in,
                 std::span<uint8_t> out);

// Window aggregates for one learnable layer over one sample, everything the
// update rules consume: time-summed pre-reset membrane, time-summed
// surrogate factor, and spike counts on both sides of the weights.
struct LayerTrace {
  std::vector<double> h_sum;
  std::vector<double> phi_sum;
  std::vector<uint32_t> out_count;
  std::vector<uint32_t> in_count;
};

struct Trace {
  int t_window = 0;
  bool keep_steps = false;  // additionally record per-step membranes/inputs
  // Which aggregates to fill.  out_count is always kept (it is what the
  // silent-unit metrics read); the others can be switched off when a caller
  // only evaluates, which skips a large share of the forward-pass work.
  bool need_h = true;
  bool need_phi = true;
  bool need_in = true;
  std::vector<LayerTrace> layers;
  std::vector<std::vector<double>> h_steps;    // [learnable][t*n + i]
  std::vector<std::vector<uint8_t>> in_steps;  // [learnable][t*n_in + j]

  void init(const Network& net, int t_window, bool keep_steps = false);
  // Restricts the trace to the named aggregates before sizing buffers.
  void init(const Network& net, int t_window, bool keep_steps, bool with_h, bool with_phi,
            bool with_in);
};

// Runs the full window: encodes nothing, just integrates the given input
// spikes through every layer and returns the output layer's spike train.
// Neuron state starts from rest each call.  When `trace` is non-null its
// aggregates are filled; when `fwd_macs` is non-null the spike-driven
// multiply-accumulate count is added to it.
SpikeTrain network_forward(const Network& net, const SpikeTrain& input,
                           Trace* trace = nullptr, uint64_t* fwd_macs = nullptr);

}  // namespace brpsnn
