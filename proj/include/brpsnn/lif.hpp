#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "brpsnn/errors.hpp"

namespace brpsnn {

// Leaky integrate-and-fire neuron parameters, shared by every unit in a layer.
struct LifParams {
  double g = 0.2;                // fraction of membrane carried to the next step
  double v_th = 0.5;             // firing threshold
  double v_reset = 0.0;          // membrane value after a spike
  double v_rest = 0.0;           // resting potential the leak decays toward
  int tau_ref = 1;               // refractory length in steps
  double surrogate_width = 0.5;  // half-width of the pseudo-derivative window

  void validate() const {
    if (!(g >= 0.0 && g < 1.0)) throw ConfigError("lif: g must be in [0,1)");
    if (!(v_th > v_reset)) throw ConfigError("lif: v_th must exceed v_reset");
    if (tau_ref < 1) throw ConfigError("lif: tau_ref must be at least 1 step");
    if (!(surrogate_width > 0.0)) throw ConfigError("lif: surrogate_width must be positive");
    if (!std::isfinite(g) || !std::isfinite(v_th) || !std::isfinite(v_reset) ||
        !std::isfinite(v_rest) || !std::isfinite(surrogate_width))
      throw ConfigError("lif: parameters must be finite");
  }
};

constexpr int32_t kNeverSpiked = INT32_MIN;

// Mutable per-layer neuron state between steps.
struct LifState {
  std::vector<double> v;
  std::vector<int32_t> last_spike;

  LifState() = default;
  explicit LifState(size_t n, double v_rest = 0.0)
      : v(n, v_rest), last_spike(n, kNeverSpiked) {
    if (n == 0) throw ContractError("LifState: neuron count must be positive");
  }

  size_t size() const { return v.size(); }

  void reset(double v_rest = 0.0) {
    std::fill(v.begin(), v.end(), v_rest);
    std::fill(last_spike.begin(), last_spike.end(), kNeverSpiked);
  }
};

inline LifState reset_state(size_t n, double v_rest = 0.0) { return LifState(n, v_rest); }

// Pseudo-derivative of the spike nonlinearity: a unit rectangle around the
// threshold.  Used wherever a gradient must pass through a spike.
inline double surrogate_grad(double v, const LifParams& p) {
  return std::fabs(v - p.v_th) <= p.surrogate_width ? 1.0 : 0.0;
}

// Advances every neuron one step.  A refractory neuron keeps integrating
// input but its leak toward rest is suppressed.  The threshold test uses the
// updated membrane; crossing writes a spike, resets the membrane, and stamps
// the step index.  `membrane_out`, when non-empty, receives the pre-reset
// membrane (the value the threshold saw), which downstream credit assignment
// needs because the stored state is clobbered by resets.
//
// Currents may arrive as float or double; either way they enter the (double)
// membrane update after an exact promotion, so both overloads agree bit for
// bit on identical current values.
template <class Cur>
inline void lif_step_impl(LifState& state, std::span<const Cur> input, const LifParams& p,
                          int step, std::span<uint8_t> spikes_out,
                          std::span<double> membrane_out) {
  const size_t n = state.size();
  if (step < 1) throw ContractError("lif_step: steps are 1-based");
  if (input.size() != n || spikes_out.size() != n)
    throw ContractError("lif_step: input/spike buffers must match neuron count");
  if (!membrane_out.empty() && membrane_out.size() != n)
    throw ContractError("lif_step: membrane buffer must match neuron count");

  double* v = state.v.data();
  int32_t* last = state.last_spike.data();
  bool finite = true;

  // tau_ref == 1 can never suppress the leak: a past spike is always at
  // least one full step old by the time the next update runs.
  const bool no_refractory = p.tau_ref <= 1;
  for (size_t i = 0; i < n; ++i) {
    const double cur = (double)input[i];
    finite &= std::isfinite(cur);
    const bool refractory =
        !no_refractory && last[i] != kNeverSpiked && (step - last[i]) < p.tau_ref;
    double vi = refractory ? v[i] + cur : p.v_rest + p.g * (v[i] - p.v_rest) + cur;
    if (!membrane_out.empty()) membrane_out[i] = vi;
    const bool fired = vi >= p.v_th;
    spikes_out[i] = fired;
    if (fired) {
      vi = p.v_reset;
      last[i] = step;
    }
    v[i] = vi;
  }
  if (!finite) throw NumericError("lif_step: non-finite input current");
}

inline void lif_step(LifState& state, std::span<const double> input, const LifParams& p,
                     int step, std::span<uint8_t> spikes_out,
                     std::span<double> membrane_out = {}) {
  lif_step_impl(state, input, p, step, spikes_out, membrane_out);
}

inline void lif_step(LifState& state, std::span<const float> input, const LifParams& p,
                     int step, std::span<uint8_t> spikes_out,
                     std::span<double> membrane_out = {}) {
  lif_step_impl(state, input, p, step, spikes_out, membrane_out);
}

}  // namespace brpsnn
