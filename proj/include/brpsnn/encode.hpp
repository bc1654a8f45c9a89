#pragma once

#include <cmath>
#include <span>
#include <string>

#include "brpsnn/errors.hpp"
#include "brpsnn/rng.hpp"
#include "brpsnn/spike_train.hpp"

namespace brpsnn {

// Which side of the Bernoulli comparison the intensity sits on.
//   intensity: fire with probability alpha * value   (bright pixels spike more)
//   literal:   fire when value < alpha * u            (bright pixels spike less)
// `intensity` is the default; `literal` is kept for fidelity comparisons.
enum class Polarity { intensity, literal };

struct EncoderConfig {
  int t_window = 20;
  double alpha = 1.0;  // gain on the firing probability
  Polarity polarity = Polarity::intensity;

  void validate() const {
    if (t_window < 1) throw ConfigError("encode: t_window must be >= 1");
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw ConfigError("encode: alpha must be positive and finite");
  }
};

// Rate-encodes a real tensor in [0,1] into a Bernoulli spike train.
// Draws are made step-major then unit-major, one per (t, i), so the stream
// layout is stable and documented.
inline SpikeTrain rate_encode(std::span<const float> raw, const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  if (raw.empty()) throw ContractError("rate_encode: empty input");
  for (float x : raw)
    if (!(x >= 0.0f && x <= 1.0f))
      throw ContractError("rate_encode: values must lie in [0,1], got " + std::to_string(x));

  SpikeTrain out(cfg.t_window, (int)raw.size());
  for (int t = 0; t < cfg.t_window; ++t) {
    uint8_t* row = out.step(t).data();
    for (size_t i = 0; i < raw.size(); ++i) {
      const double u = rng.uniform();
      const bool fire = cfg.polarity == Polarity::intensity
                            ? u < cfg.alpha * (double)raw[i]
                            : (double)raw[i] < cfg.alpha * u;  // literal
      row[i] = fire;
    }
  }
  return out;
}

// Deterministic label train: the target unit fires at every step, all other
// units stay silent, so target firing rates are exactly one-hot.
inline SpikeTrain label_encode(int label, int num_classes, int t_window) {
  if (num_classes < 2) throw ContractError("label_encode: need at least two classes");
  if (label < 0 || label >= num_classes) throw ContractError("label_encode: label out of range");
  if (t_window < 1) throw ContractError("label_encode: t_window must be >= 1");
  SpikeTrain out(t_window, num_classes);
  for (int t = 0; t < t_window; ++t) out.set(t, label, 1);
  return out;
}

}  // namespace brpsnn
