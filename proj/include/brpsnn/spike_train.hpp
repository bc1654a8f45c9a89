#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "brpsnn/errors.hpp"

namespace brpsnn {

// Binary spike tensor over a time window, stored step-major:
// data[t * features + i] is 1 when unit i fires at step t.
struct SpikeTrain {
  int t_window = 0;
  int features = 0;
  std::vector<uint8_t> data;

  SpikeTrain() = default;
  SpikeTrain(int t, int n) : t_window(t), features(n), data((size_t)t * n, 0) {
    if (t < 1 || n < 1) throw ContractError("SpikeTrain: window and feature count must be positive");
  }

  std::span<const uint8_t> step(int t) const {
    return {data.data() + (size_t)t * features, (size_t)features};
  }
  std::span<uint8_t> step(int t) {
    return {data.data() + (size_t)t * features, (size_t)features};
  }

  uint8_t at(int t, int i) const { return data[(size_t)t * features + i]; }
  void set(int t, int i, uint8_t v) { data[(size_t)t * features + i] = v; }
};

// Per-unit firing rate: spike count divided by window length.
inline std::vector<double> firerate(const SpikeTrain& s) {
  std::vector<double> r(s.features, 0.0);
  for (int t = 0; t < s.t_window; ++t) {
    const uint8_t* row = s.data.data() + (size_t)t * s.features;
    for (int i = 0; i < s.features; ++i) r[i] += row[i];
  }
  const double inv = 1.0 / s.t_window;
  for (double& x : r) x *= inv;
  return r;
}

inline uint64_t total_spikes(const SpikeTrain& s) {
  return std::accumulate(s.data.begin(), s.data.end(), uint64_t{0});
}

}  // namespace brpsnn
