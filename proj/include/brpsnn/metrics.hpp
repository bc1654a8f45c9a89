#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brpsnn/learn.hpp"

namespace brpsnn {

// Exact operation counters for one epoch.
//   forward_ops: spike-driven synaptic accumulations (one per weight fetch)
//   update_ops:  gradient elements written plus per-rule bookkeeping
//                (feedback projection matvecs; for pseudo_bp each layer's
//                full chain from the output, unshared)
struct OpCount {
  uint64_t forward_ops = 0;
  uint64_t update_ops = 0;
  int k = 0;  // learnable layer count
  TpMode mode = TpMode::brp;
};

struct EpochRow {
  int epoch = 0;
  std::string split;  // "train" or "test"
  double accuracy = 0.0;
  double loss = 0.0;
  double silent_conv = 0.0;  // first conv layer; 0 when the net has none
  double silent_fc = 0.0;    // first hidden fc layer; 0 when the net has none
  uint64_t fwd_ops = 0;
  uint64_t upd_ops = 0;
  uint64_t wall_ms = 0;  // forced to 0 in deterministic mode
};

// Fraction of units that emitted no spike over the window.
double silent_fraction(std::span<const uint32_t> spike_counts);

// Writes `epoch,split,accuracy,loss,silent_conv,silent_fc,fwd_ops,upd_ops,wall_ms`
// with one row per entry, UTF-8, LF endings; formatting is fixed so equal
// metrics serialize to identical bytes.
void emit_csv(const std::vector<EpochRow>& rows, const std::string& path);
std::string csv_to_string(const std::vector<EpochRow>& rows);

}  // namespace brpsnn
