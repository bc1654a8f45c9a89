#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brpsnn/errors.hpp"
#include "brpsnn/rng.hpp"
#include "brpsnn/spike_train.hpp"

namespace brpsnn {

// Analog samples are real tensors awaiting rate encoding; event samples are
// already binary spike trains and skip the encoder.
enum class Modality { analog, event };

struct Dataset {
  Modality modality = Modality::analog;
  std::array<int, 3> shape{0, 0, 0};  // {C, H, W}
  int num_classes = 0;
  int t_bins = 0;  // native window length, event modality only
  std::vector<float> analog;       // [n * C*H*W], values in [0,1]
  std::vector<SpikeTrain> events;  // [n]
  std::vector<int32_t> labels;

  size_t size() const { return labels.size(); }
  int sample_features() const { return shape[0] * shape[1] * shape[2]; }
  std::span<const float> sample(size_t i) const {
    return {analog.data() + i * (size_t)sample_features(), (size_t)sample_features()};
  }

  void validate() const;
  // Keeps only the first n samples (deterministic subset selection).
  void truncate(size_t n);
};

// Big-endian IDX pair: images magic 0x00000803 (u8, 3 dims), labels magic
// 0x00000801.  Pixels are scaled to [0,1] by /255.
Dataset read_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path);

// CIFAR-10 binary batches: 3073-byte records (label byte + 3x32x32 planes).
Dataset read_cifar10_bin(const std::vector<std::string>& paths);

// Text event streams.  Header `classes=<n> width=<w> height=<h> t_bins=<T>`,
// then per sample a `label:<k>` line followed by `t x y p` event lines with
// non-decreasing t.  Events are binned into T equal-width bins over the
// sample's duration max(last_t+1, T) — timestamps already inside [0, T) map
// to themselves — and a bin is 1 when at least one event falls in it,
// polarities merged.
Dataset read_event_stream(const std::string& path);
void write_event_stream(const Dataset& ds, const std::string& path);

// Synthetic generators (all deterministic in seed).
//
// digits: glyph-rendered 28x28 grayscale digits, 10 classes, with placement
// jitter, contrast scaling, and clipped Gaussian pixel noise.
Dataset synth_digits(int n, uint64_t seed);

// order2: two classes with identical per-channel spike counts that differ
// only in spike timing (a step pair {q,q+1} versus {q,q+9}), so any
// rate-collapsed readout is at chance.  ramp: rising versus falling
// intensity ramps across channels, Bernoulli-encoded at generation time.
// n is the per-class sample count.
Dataset synth_temporal(const std::string& kind, int n, uint64_t seed);

// Deterministic batch index sequence for one epoch; the final partial batch
// is kept.  shuffle=false yields identity order regardless of seed.
std::vector<std::vector<int32_t>> make_batches(size_t n, int batch, bool shuffle,
                                               uint64_t seed, int epoch);

}  // namespace brpsnn
