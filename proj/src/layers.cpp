#include "brpsnn/layers.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace brpsnn {

size_t Network::weight_count(int layer_idx) const {
  const LayerSpec& l = layers[layer_idx];
  switch (l.kind) {
    case LayerKind::conv:
      return (size_t)l.channels * l.in_shape[0] * l.kh * l.kw;
    case LayerKind::fc:
      return (size_t)l.in_size() * l.units;
    case LayerKind::pool:
      return 0;
  }
  return 0;
}

Network Network::build(const std::string& topology, std::array<int, 3> input_shape,
                       const LifParams& lif, double init_gain, uint64_t seed) {
  lif.validate();
  if (!(init_gain > 0.0)) throw ContractError("Network::build: init_gain must be positive");
  Network net;
  net.topology = topology;
  net.input_shape = input_shape;
  net.lif = lif;
  net.layers = parse_topology(topology);
  resolve_shapes(net.layers, input_shape);
  net.weights.resize(net.layers.size());

  Rng rng(seed, {stream::kWeightInit});
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (l.kind == LayerKind::pool) continue;
    net.learnable.push_back((int)i);
    const size_t count = net.weight_count((int)i);
    const int fan_in = l.kind == LayerKind::conv ? l.in_shape[0] * l.kh * l.kw : l.in_size();
    const double bound = init_gain / std::sqrt((double)fan_in);
    auto& w = net.weights[i];
    w.resize(count);
    for (size_t k = 0; k < count; ++k) w[k] = (float)rng.uniform(-bound, bound);
  }
  return net;
}

void fc_currents(std::span<const float> w, int n_in, int n_out,
                 std::span<const uint8_t> in_spikes, std::span<float> currents) {
  if ((int)in_spikes.size() != n_in || (int)currents.size() != n_out ||
      w.size() != (size_t)n_in * n_out)
    throw ContractError("fc_currents: buffer sizes do not match layer dims");
  float* cur = currents.data();
  for (int j = 0; j < n_in; ++j) {
    if (!in_spikes[j]) continue;
    const float* row = w.data() + (size_t)j * n_out;
    for (int i = 0; i < n_out; ++i) cur[i] += row[i];
  }
}

void conv_currents(const LayerSpec& spec, std::span<const float> w,
                   std::span<const uint8_t> in_spikes, std::span<float> currents) {
  const int in_c = spec.in_shape[0], in_h = spec.in_shape[1], in_w = spec.in_shape[2];
  const int out_c = spec.channels, out_h = spec.out_shape[1], out_w = spec.out_shape[2];
  const int kh = spec.kh, kw = spec.kw;
  if ((int)in_spikes.size() != in_c * in_h * in_w ||
      (int)currents.size() != out_c * out_h * out_w ||
      w.size() != (size_t)out_c * in_c * kh * kw)
    throw ContractError("conv_currents: buffer sizes do not match layer dims");

  // Scatter each input spike into every output position whose receptive
  // field covers it.  For a fixed output unit the contributing spikes
  // arrive in ascending (ic, ky, kx), matching the dot-product order.
  const uint8_t* in = in_spikes.data();
  float* cur = currents.data();
  size_t flat = 0;
  for (int ic = 0; ic < in_c; ++ic) {
    for (int y = 0; y < in_h; ++y) {
      const int ky_lo = std::max(0, y - out_h + 1), ky_hi = std::min(kh - 1, y);
      for (int x = 0; x < in_w; ++x, ++flat) {
        if (!in[flat]) continue;
        const int kx_lo = std::max(0, x - out_w + 1), kx_hi = std::min(kw - 1, x);
        for (int oc = 0; oc < out_c; ++oc) {
          const float* wk = w.data() + ((size_t)oc * in_c + ic) * kh * kw;
          for (int ky = ky_lo; ky <= ky_hi; ++ky) {
            const float* wrow = wk + (size_t)ky * kw;
            float* crow = cur + ((size_t)oc * out_h + (y - ky)) * out_w + x;
            // kx ascending walks the output row backwards; each output unit
            // is touched once per spike so per-unit order is unaffected.
            for (int kx = kx_lo; kx <= kx_hi; ++kx) crow[-kx] += wrow[kx];
          }
        }
      }
    }
  }
}

void pool_spikes(const LayerSpec& spec, std::span<const uint8_t> in,
                 std::span<uint8_t> out) {
  const int c = spec.in_shape[0], in_h = spec.in_shape[1], in_w = spec.in_shape[2];
  const int out_h = spec.out_shape[1], out_w = spec.out_shape[2];
  const int k = spec.pool_k;
  if ((int)in.size() != c * in_h * in_w || (int)out.size() != c * out_h * out_w)
    throw ContractError("pool_spikes: buffer sizes do not match layer dims");
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        uint8_t any = 0;
        for (int dy = 0; dy < k && !any; ++dy) {
          const uint8_t* row = in.data() + ((size_t)ch * in_h + oy * k + dy) * in_w + ox * k;
          for (int dx = 0; dx < k; ++dx) any |= row[dx];
        }
        out[((size_t)ch * out_h + oy) * out_w + ox] = any ? 1 : 0;
      }
    }
  }
}

void Trace::init(const Network& net, int window, bool steps) {
  init(net, window, steps, true, true, true);
}

void Trace::init(const Network& net, int window, bool steps, bool with_h, bool with_phi,
                 bool with_in) {
  t_window = window;
  keep_steps = steps;
  need_h = with_h;
  need_phi = with_phi;
  need_in = with_in;
  layers.assign(net.learnable.size(), {});
  h_steps.assign(steps ? net.learnable.size() : 0, {});
  in_steps.assign(steps ? net.learnable.size() : 0, {});
  for (size_t li = 0; li < net.learnable.size(); ++li) {
    const LayerSpec& l = net.layers[net.learnable[li]];
    if (need_h) layers[li].h_sum.assign(l.out_size(), 0.0);
    if (need_phi) layers[li].phi_sum.assign(l.out_size(), 0.0);
    layers[li].out_count.assign(l.out_size(), 0);
    if (need_in) layers[li].in_count.assign(l.in_size(), 0);
    if (steps) {
      h_steps[li].assign((size_t)window * l.out_size(), 0.0);
      in_steps[li].assign((size_t)window * l.in_size(), 0);
    }
  }
}

namespace {

// MACs a single input spike induces in a valid conv: number of output
// positions covering it times the output channel count.
inline uint64_t conv_fanout(const LayerSpec& l, int y, int x) {
  const int ky = std::min(l.kh - 1, y) - std::max(0, y - l.out_shape[1] + 1) + 1;
  const int kx = std::min(l.kw - 1, x) - std::max(0, x - l.out_shape[2] + 1) + 1;
  return (uint64_t)ky * kx * l.channels;
}

}  // namespace

namespace {

// Whole-window fc current accumulation.  A first sequential pass condenses
// the spike train into one step bitmask per presynaptic unit; the add pass
// then visits each unit once with its weight row cache-hot.  The per-(unit,
// step) summation order stays ascending in j, identical to the
// one-step-at-a-time formulation.
void fc_currents_window(std::span<const float> w, int n_in, int n_out,
                        const SpikeTrain& in, std::vector<float>& currents,
                        std::vector<uint32_t>& masks, uint64_t* macs) {
  const int t_window = in.t_window;
  currents.assign((size_t)t_window * n_out, 0.0f);
  masks.resize(n_in);
  // Windows longer than one mask are processed in 32-step blocks; a fixed
  // step only ever receives contributions from its own block, so the
  // per-step summation order is untouched.
  for (int tb = 0; tb < t_window; tb += 32) {
    const int t_hi = std::min(t_window, tb + 32);
    uint32_t* mask = masks.data();
    std::fill(masks.begin(), masks.end(), 0u);
    for (int t = tb; t < t_hi; ++t) {
      const uint8_t* row = in.data.data() + (size_t)t * n_in;
      const uint32_t bit = 1u << (t - tb);
      for (int j = 0; j < n_in; ++j)
        if (row[j]) mask[j] |= bit;
    }
    for (int j = 0; j < n_in; ++j) {
      uint32_t m = mask[j];
      if (!m) continue;
      const float* row = w.data() + (size_t)j * n_out;
      if (macs) *macs += (uint64_t)std::popcount(m) * n_out;
      do {
        const int t = tb + std::countr_zero(m);
        m &= m - 1;
        float* cur = currents.data() + (size_t)t * n_out;
        for (int i = 0; i < n_out; ++i) cur[i] += row[i];
      } while (m);
    }
  }
}

// Integrates one layer over the whole window from precomputed currents,
// writing spikes and filling the requested trace aggregates in the same
// sweep.  Only valid without refractory suppression (tau_ref <= 1), where
// last-spike bookkeeping is dead state; the update is the exact expression
// lif_step evaluates on that path.
void lif_window_fused(const LifParams& p, const std::vector<float>& currents, int t_window,
                      int n, SpikeTrain& out, LayerTrace* lt, bool need_h, bool need_phi,
                      std::vector<double>* h_step_buf) {
  std::vector<double> v((size_t)n, p.v_rest);
  double* vp = v.data();
  bool finite = true;
  for (int t = 0; t < t_window; ++t) {
    const float* cur = currents.data() + (size_t)t * n;
    uint8_t* spikes = out.step(t).data();
    double* hs = h_step_buf ? h_step_buf->data() + (size_t)t * n : nullptr;
    for (int i = 0; i < n; ++i) {
      const double c = (double)cur[i];
      finite &= std::isfinite(c);
      const double vi = p.v_rest + p.g * (vp[i] - p.v_rest) + c;
      const bool fired = vi >= p.v_th;
      spikes[i] = fired;
      vp[i] = fired ? p.v_reset : vi;
      if (hs) hs[i] = vi;
      if (lt) {
        if (need_h) lt->h_sum[i] += vi;
        if (need_phi) lt->phi_sum[i] += std::fabs(vi - p.v_th) <= p.surrogate_width ? 1.0 : 0.0;
        lt->out_count[i] += fired;
      }
    }
  }
  if (!finite) throw NumericError("lif_step: non-finite input current");
}

}  // namespace

SpikeTrain network_forward(const Network& net, const SpikeTrain& input,
                           Trace* trace, uint64_t* fwd_macs) {
  const int expected_in = net.input_shape[0] * net.input_shape[1] * net.input_shape[2];
  if (input.features != expected_in)
    throw ContractError("network_forward: input features " + std::to_string(input.features) +
                        " do not match network input " + std::to_string(expected_in));
  const int t_window = input.t_window;
  if (trace && trace->t_window != t_window)
    throw ContractError("network_forward: trace window does not match input window");

  // Layers are feedforward with LIF state private to each layer, so the whole
  // window can be swept one layer at a time; per-unit arithmetic order is the
  // same as a step-major sweep.
  uint64_t macs = 0;
  SpikeTrain in_train = input;
  std::vector<float> currents;
  std::vector<uint32_t> masks;
  std::vector<double> membrane;
  int li = 0;  // learnable-layer cursor
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    SpikeTrain out_train(t_window, l.out_size());

    if (l.kind == LayerKind::pool) {
      for (int t = 0; t < t_window; ++t)
        pool_spikes(l, in_train.step(t), out_train.step(t));
      in_train = std::move(out_train);
      continue;
    }

    const int n = l.out_size();
    if (l.kind == LayerKind::fc) {
      fc_currents_window(net.weights[i], l.in_size(), n, in_train, currents, masks,
                         fwd_macs ? &macs : nullptr);
    } else {
      currents.assign((size_t)t_window * n, 0.0f);
      for (int t = 0; t < t_window; ++t) {
        conv_currents(l, net.weights[i],
                      in_train.step(t),
                      {currents.data() + (size_t)t * n, (size_t)n});
        if (fwd_macs) {
          const auto row = in_train.step(t);
          size_t flat = 0;
          for (int ic = 0; ic < l.in_shape[0]; ++ic)
            for (int y = 0; y < l.in_shape[1]; ++y)
              for (int x = 0; x < l.in_shape[2]; ++x, ++flat)
                if (row[flat]) macs += conv_fanout(l, y, x);
        }
      }
    }

    LayerTrace* lt = trace ? &trace->layers[li] : nullptr;
    const bool steps = trace && trace->keep_steps;
    if (net.lif.tau_ref <= 1) {
      lif_window_fused(net.lif, currents, t_window, n, out_train, lt,
                       trace && trace->need_h, trace && trace->need_phi,
                       steps ? &trace->h_steps[li] : nullptr);
    } else {
      LifState state((size_t)n, net.lif.v_rest);
      membrane.resize(n);
      for (int t = 0; t < t_window; ++t) {
        lif_step(state, std::span<const float>{currents.data() + (size_t)t * n, (size_t)n},
                 net.lif, t + 1, out_train.step(t), membrane);
        if (lt) {
          for (int u = 0; u < n; ++u) {
            if (trace->need_h) lt->h_sum[u] += membrane[u];
            if (trace->need_phi) lt->phi_sum[u] += surrogate_grad(membrane[u], net.lif);
            lt->out_count[u] += out_train.at(t, u);
          }
          if (steps)
            std::copy(membrane.begin(), membrane.end(),
                      trace->h_steps[li].begin() + (size_t)t * n);
        }
      }
    }
    if (lt) {
      if (trace->need_in) {
        for (int t = 0; t < t_window; ++t) {
          const auto row = in_train.step(t);
          for (size_t u = 0; u < row.size(); ++u) lt->in_count[u] += row[u];
        }
      }
      if (steps)
        std::copy(in_train.data.begin(), in_train.data.end(), trace->in_steps[li].begin());
    }
    ++li;
    in_train = std::move(out_train);
  }
  if (fwd_macs) *fwd_macs += macs;
  return in_train;
}

}  // namespace brpsnn
