#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brpsnn/layers.hpp"

namespace brpsnn {

// How the teaching signal for hidden layers is formed.
//   brp:       label rates alone, projected through fixed random feedback
//   err:       signed output-rate error, projected the same way
//   sign:      sign of the output-rate error, projected the same way
//   pseudo_bp: layerwise chained credit assignment through the surrogate
enum class TpMode { brp, err, sign, pseudo_bp };

// Whether the local regression uses window-averaged membranes or is applied
// step by step (requires a trace recorded with keep_steps).
enum class TpApply { per_window, per_step };

// Feedback entry scaling: inv_sqrt divides the uniform(-1,1) draw by
// sqrt(layer size); absolute keeps the draw and multiplies by gain only.
enum class FeedbackNorm { inv_sqrt, absolute };

TpMode parse_tp_mode(const std::string& s);
std::string to_string(TpMode m);

// Fixed random feedback, one matrix per learnable layer, row-major
// [n_l x classes].  The output layer's slot stays empty: class error maps
// to its own units directly.  Never mutated after creation.
struct Feedback {
  std::vector<std::vector<float>> b;
};

Feedback init_feedback(const Network& net, uint64_t seed,
                       FeedbackNorm norm = FeedbackNorm::inv_sqrt, double gain = 1.0);

// Order-independent content hash used to assert immutability across training.
uint64_t feedback_fingerprint(const Feedback& fb);

// Teaching vector over class units from window firing rates.
// brp reads only the label train; the output train is accepted so every mode
// has one call shape, but brp's result cannot depend on it.
std::vector<double> compute_tp(TpMode mode, const SpikeTrain& label_train,
                               const SpikeTrain& output_train);

// target = B . tp for one layer (double accumulation in ascending class order).
std::vector<double> project_target(std::span<const float> b, int n_units, int classes,
                                   std::span<const double> tp);

// Residual of the layer regression: e = h_sum/T - target.
std::vector<double> residual(const LayerTrace& trace, std::span<const double> target,
                             int t_window);

// grad += e (x) mean input spike rate; layouts mirror the weight tensors.
void local_grad_fc(const LayerSpec& spec, const LayerTrace& trace,
                   std::span<const double> e, int t_window, std::span<double> grad);
void local_grad_conv(const LayerSpec& spec, const LayerTrace& trace,
                     std::span<const double> e, int t_window, std::span<double> grad);

// Step-resolved variants: grad += (1/T) sum_t (h_t - target) (x) s_t.
// Needs a trace recorded with keep_steps.
void local_grad_fc_steps(const LayerSpec& spec, const Trace& trace, int li,
                         std::span<const double> target, std::span<double> grad);
void local_grad_conv_steps(const LayerSpec& spec, const Trace& trace, int li,
                           std::span<const double> target, std::span<double> grad);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m, v;
  int64_t t = 0;

  AdamState() = default;
  explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// One optimizer step over a full tensor; moments and arithmetic in double,
// parameters may live in float or double.
void adam_update(std::span<float> w, std::span<const double> grad, AdamState& st,
                 double eta, const AdamParams& p = {});
void adam_update(std::span<double> w, std::span<const double> grad, AdamState& st,
                 double eta, const AdamParams& p = {});

// Chained credit assignment through the surrogate from the output-rate error
// (y - label rate).  Returns per-learnable-layer gradients plus the update-op
// count under the convention that each layer's update pays for its whole
// chain from the output (no sharing), which is what makes the cost grow
// superlinearly with depth.
struct PbpGrads {
  std::vector<std::vector<double>> grads;
  uint64_t update_ops = 0;
};
PbpGrads pseudo_bp_grads(const Network& net, const Trace& trace,
                         std::span<const double> output_err);

// In-place variant for the batch loop: adds one sample's chained gradients
// into per-layer accumulators sized like the weight tensors; returns the
// counted update ops.
uint64_t pseudo_bp_accumulate(const Network& net, const Trace& trace,
                              std::span<const double> output_err,
                              std::vector<std::vector<double>>& grad_acc);

// The chaining half of pseudo_bp_accumulate alone: per-layer surrogate-gated
// deltas (what local_grad_* would consume as `e`) without touching any
// gradient.  pseudo_bp_accumulate(net, tr, err, acc) is exactly
// local_grad_*(l, tr, deltas[li]) applied per layer.
std::vector<std::vector<double>> pseudo_bp_deltas(const Network& net, const Trace& trace,
                                                  std::span<const double> output_err);

// Structural update-op count for one sample, a function of the topology
// alone.  pseudo_bp: each layer's update pays its gradient elements, its
// surrogate gating, and the full chain of matvecs from the output down to
// itself.  brp/err/sign: gradient elements plus the feedback projection
// matvec per hidden layer.
uint64_t pseudo_bp_update_ops(const Network& net);
uint64_t tp_update_ops(const Network& net);

// Defers a batch of fc-layer rank-1 gradient terms so the big accumulator is
// streamed once per batch instead of once per sample.  flush() adds exactly
// the terms the equivalent sequence of local_grad_fc calls would have added,
// in the same per-weight order, so the result is bit-identical.
class FcGradBatch {
 public:
  void reset(int n_in, int n_out);
  // Records one sample's mean input rates (from a trace's in_count) and its
  // per-output error vector.
  void add(std::span<const uint32_t> in_count, int t_window, std::span<const double> e);
  void flush(std::span<double> grad);
  int pending() const { return count_; }

 private:
  int n_in_ = 0, n_out_ = 0, count_ = 0;
  std::vector<double> rates_;  // [sample][n_in]
  std::vector<double> errs_;   // [sample][n_out]
};

}  // namespace brpsnn
