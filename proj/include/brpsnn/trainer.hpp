#pragma once

#include <functional>
#include <ostream>

#include "brpsnn/checkpoint.hpp"
#include "brpsnn/config.hpp"
#include "brpsnn/metrics.hpp"

namespace brpsnn {

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  double silent_conv = 0.0;
  double silent_fc = 0.0;
  std::vector<double> silent_per_layer;  // one per learnable layer
  uint64_t fwd_ops = 0;
};

struct EpochResult {
  double accuracy = 0.0;
  double loss = 0.0;
  double silent_conv = 0.0;
  double silent_fc = 0.0;
  OpCount ops;
};

// Encodes one dataset sample into spikes.  Analog samples get a fresh
// Bernoulli draw from a stream keyed by (seed, train/eval, [epoch,] index);
// evaluation streams ignore the epoch so a reloaded network scores
// identically.  Event samples pass through natively.
SpikeTrain encode_sample(const Dataset& ds, size_t idx, const RunConfig& cfg,
                         bool eval_stream, int epoch);

// Fresh training state for the config + data (weights, feedback, optimizer).
TrainState init_state(const RunConfig& cfg, const Dataset& train);

// One pass over the training set: forward, rule-specific gradient
// accumulation per batch, one optimizer step per batch per layer.
EpochResult train_epoch(TrainState& st, const Dataset& train, const RunConfig& cfg,
                        int epoch);

EvalResult evaluate(const Network& net, const Dataset& test, const RunConfig& cfg);

struct TrainOutcome {
  TrainState state;
  std::vector<EpochRow> rows;
};

// Full training run.  `stop` (optional) sees each test evaluation and may
// end training early; `log` (optional) receives one line per epoch.
TrainOutcome run_training(const RunConfig& cfg, const DataPair& data,
                          std::ostream* log = nullptr,
                          const std::function<bool(int, const EvalResult&)>& stop = {});

// Silent-unit probe: feeds Bernoulli noise inputs whose spike proportion is
// swept over `proportions` (common random numbers, so raising the proportion
// only adds spikes) and reports mean silent fractions per learnable layer.
std::vector<std::vector<double>> silent_sweep(const Network& net,
                                              const std::vector<double>& proportions,
                                              int n_probes, int t_window, uint64_t seed);

// Structural cost probe used by the complexity benchmark: one epoch over a
// tiny synthetic set for an fc stack of the given width/depth, returning the
// epoch's counters.
OpCount bench_counters(TpMode mode, int width, int depth, int batch, uint64_t seed);

int argmax_lowest(std::span<const double> v);

}  // namespace brpsnn
