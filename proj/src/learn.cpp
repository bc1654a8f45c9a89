#include "brpsnn/learn.hpp"

#include <algorithm>
#include <cmath>

namespace brpsnn {

TpMode parse_tp_mode(const std::string& s) {
  if (s == "brp") return TpMode::brp;
  if (s == "err") return TpMode::err;
  if (s == "sign") return TpMode::sign;
  if (s == "pseudo_bp") return TpMode::pseudo_bp;
  throw ConfigError("unknown tp mode '" + s + "' (expected brp|err|sign|pseudo_bp)");
}

std::string to_string(TpMode m) {
  switch (m) {
    case TpMode::brp: return "brp";
    case TpMode::err: return "err";
    case TpMode::sign: return "sign";
    case TpMode::pseudo_bp: return "pseudo_bp";
  }
  return "?";
}

Feedback init_feedback(const Network& net, uint64_t seed, FeedbackNorm norm, double gain) {
  if (!(gain > 0.0)) throw ContractError("init_feedback: gain must be positive");
  const int classes = net.num_classes();
  Feedback fb;
  fb.b.resize(net.learnable.size());
  Rng rng(seed, {stream::kFeedback});
  for (size_t li = 0; li + 1 < net.learnable.size(); ++li) {
    const LayerSpec& l = net.layers[net.learnable[li]];
    const int n = l.out_size();
    const double scale =
        norm == FeedbackNorm::inv_sqrt ? gain / std::sqrt((double)n) : gain;
    auto& b = fb.b[li];
    b.resize((size_t)n * classes);
    for (auto& x : b) x = (float)(rng.uniform(-1.0, 1.0) * scale);
  }
  return fb;  // last slot left empty: identity routing for the output layer
}

uint64_t feedback_fingerprint(const Feedback& fb) {
  uint64_t h = 0x243f6a8885a308d3ULL;
  for (const auto& mat : fb.b) {
    uint64_t s = h ^ mat.size();
    h = splitmix64(s);
    for (float x : mat) {
      uint32_t bits;
      static_assert(sizeof bits == sizeof x);
      __builtin_memcpy(&bits, &x, sizeof bits);
      s = h ^ bits;
      h = splitmix64(s);
    }
  }
  return h;
}

std::vector<double> compute_tp(TpMode mode, const SpikeTrain& label_train,
                               const SpikeTrain& output_train) {
  if (mode == TpMode::pseudo_bp)
    throw ContractError("compute_tp: pseudo_bp has no projected teaching vector");
  std::vector<double> ybar = firerate(label_train);
  if (mode == TpMode::brp) return ybar;  // output deliberately unread

  if (output_train.features != label_train.features ||
      output_train.t_window != label_train.t_window)
    throw ContractError("compute_tp: output and label trains must have equal shape");
  std::vector<double> y = firerate(output_train);
  std::vector<double> tp(y.size());
  for (size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - ybar[i];
    tp[i] = mode == TpMode::err ? d : (d > 0.0) - (d < 0.0);
  }
  return tp;
}

std::vector<double> project_target(std::span<const float> b, int n_units, int classes,
                                   std::span<const double> tp) {
  if (b.size() != (size_t)n_units * classes || (int)tp.size() != classes)
    throw ContractError("project_target: dimension mismatch");
  std::vector<double> out(n_units);
  for (int u = 0; u < n_units; ++u) {
    const float* row = b.data() + (size_t)u * classes;
    double acc = 0.0;
    for (int c = 0; c < classes; ++c) acc += (double)row[c] * tp[c];
    out[u] = acc;
  }
  return out;
}

std::vector<double> residual(const LayerTrace& trace, std::span<const double> target,
                             int t_window) {
  if (trace.h_sum.size() != target.size())
    throw ContractError("residual: target size does not match layer");
  std::vector<double> e(target.size());
  const double inv_t = 1.0 / t_window;
  for (size_t u = 0; u < e.size(); ++u) e[u] = trace.h_sum[u] * inv_t - target[u];
  return e;
}

void local_grad_fc(const LayerSpec& spec, const LayerTrace& trace,
                   std::span<const double> e, int t_window, std::span<double> grad) {
  const int n_in = spec.in_size(), n_out = spec.units;
  if ((int)e.size() != n_out || grad.size() != (size_t)n_in * n_out ||
      (int)trace.in_count.size() != n_in)
    throw ContractError("local_grad_fc: dimension mismatch");
  const double inv_t = 1.0 / t_window;
  for (int j = 0; j < n_in; ++j) {
    if (!trace.in_count[j]) continue;
    const double rate = trace.in_count[j] * inv_t;
    double* row = grad.data() + (size_t)j * n_out;
    for (int i = 0; i < n_out; ++i) row[i] += rate * e[i];
  }
}

void local_grad_conv(const LayerSpec& spec, const LayerTrace& trace,
                     std::span<const double> e, int t_window, std::span<double> grad) {
  const int in_c = spec.in_shape[0], in_h = spec.in_shape[1], in_w = spec.in_shape[2];
  const int out_c = spec.channels, out_h = spec.out_shape[1], out_w = spec.out_shape[2];
  const int kh = spec.kh, kw = spec.kw;
  if ((int)e.size() != out_c * out_h * out_w ||
      grad.size() != (size_t)out_c * in_c * kh * kw ||
      (int)trace.in_count.size() != in_c * in_h * in_w)
    throw ContractError("local_grad_conv: dimension mismatch");
  const double inv_t = 1.0 / t_window;
  // grad[oc][ic][ky][kx] += sum_{oy,ox} e[oc][oy][ox] * rate_in[ic][oy+ky][ox+kx]
  for (int oc = 0; oc < out_c; ++oc) {
    const double* emap = e.data() + (size_t)oc * out_h * out_w;
    for (int ic = 0; ic < in_c; ++ic) {
      const uint32_t* in_cnt = trace.in_count.data() + (size_t)ic * in_h * in_w;
      double* gk = grad.data() + ((size_t)oc * in_c + ic) * kh * kw;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          double acc = 0.0;
          for (int oy = 0; oy < out_h; ++oy) {
            const double* erow = emap + (size_t)oy * out_w;
            const uint32_t* crow = in_cnt + (size_t)(oy + ky) * in_w + kx;
            for (int ox = 0; ox < out_w; ++ox) acc += erow[ox] * (crow[ox] * inv_t);
          }
          gk[(size_t)ky * kw + kx] += acc;
        }
      }
    }
  }
}

void local_grad_fc_steps(const LayerSpec& spec, const Trace& trace, int li,
                         std::span<const double> target, std::span<double> grad) {
  if (!trace.keep_steps) throw ContractError("local_grad_fc_steps: trace lacks steps");
  const int n_in = spec.in_size(), n_out = spec.units;
  if ((int)target.size() != n_out || grad.size() != (size_t)n_in * n_out)
    throw ContractError("local_grad_fc_steps: dimension mismatch");
  const int T = trace.t_window;
  const double inv_t = 1.0 / T;
  for (int t = 0; t < T; ++t) {
    const double* h = trace.h_steps[li].data() + (size_t)t * n_out;
    const uint8_t* s = trace.in_steps[li].data() + (size_t)t * n_in;
    for (int j = 0; j < n_in; ++j) {
      if (!s[j]) continue;
      double* row = grad.data() + (size_t)j * n_out;
      for (int i = 0; i < n_out; ++i) row[i] += inv_t * (h[i] - target[i]);
    }
  }
}

void local_grad_conv_steps(const LayerSpec& spec, const Trace& trace, int li,
                           std::span<const double> target, std::span<double> grad) {
  if (!trace.keep_steps) throw ContractError("local_grad_conv_steps: trace lacks steps");
  const int in_c = spec.in_shape[0], in_h = spec.in_shape[1], in_w = spec.in_shape[2];
  const int out_c = spec.channels, out_h = spec.out_shape[1], out_w = spec.out_shape[2];
  const int kh = spec.kh, kw = spec.kw;
  if ((int)target.size() != out_c * out_h * out_w ||
      grad.size() != (size_t)out_c * in_c * kh * kw)
    throw ContractError("local_grad_conv_steps: dimension mismatch");
  const int T = trace.t_window;
  const double inv_t = 1.0 / T;
  for (int t = 0; t < T; ++t) {
    const double* h = trace.h_steps[li].data() + (size_t)t * out_c * out_h * out_w;
    const uint8_t* s = trace.in_steps[li].data() + (size_t)t * in_c * in_h * in_w;
    for (int oc = 0; oc < out_c; ++oc) {
      for (int ic = 0; ic < in_c; ++ic) {
        double* gk = grad.data() + ((size_t)oc * in_c + ic) * kh * kw;
        for (int ky = 0; ky < kh; ++ky) {
          for (int kx = 0; kx < kw; ++kx) {
            double acc = 0.0;
            for (int oy = 0; oy < out_h; ++oy) {
              for (int ox = 0; ox < out_w; ++ox) {
                const uint8_t sp = s[((size_t)ic * in_h + oy + ky) * in_w + ox + kx];
                if (!sp) continue;
                const size_t o = ((size_t)oc * out_h + oy) * out_w + ox;
                acc += h[o] - target[o];
              }
            }
            gk[(size_t)ky * kw + kx] += inv_t * acc;
          }
        }
      }
    }
  }
}

namespace {

inline void adam_tensor(double* w_d, float* w_f, size_t n, const double* g,
                        AdamState& st, double eta, const AdamParams& p) {
  if (st.m.size() != n) throw ContractError("adam_update: state size does not match tensor");
  st.t += 1;
  const double bc1 = 1.0 - std::pow(p.beta1, (double)st.t);
  const double bc2 = 1.0 - std::pow(p.beta2, (double)st.t);
  double* m = st.m.data();
  double* v = st.v.data();
  for (size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * gi;
    v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * gi * gi;
    const double step = eta * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + p.eps);
    if (w_d)
      w_d[i] -= step;
    else
      w_f[i] = (float)((double)w_f[i] - step);
  }
}

}  // namespace

void adam_update(std::span<float> w, std::span<const double> grad, AdamState& st,
                 double eta, const AdamParams& p) {
  if (w.size() != grad.size()) throw ContractError("adam_update: grad size mismatch");
  adam_tensor(nullptr, w.data(), w.size(), grad.data(), st, eta, p);
}

void adam_update(std::span<double> w, std::span<const double> grad, AdamState& st,
                 double eta, const AdamParams& p) {
  if (w.size() != grad.size()) throw ContractError("adam_update: grad size mismatch");
  adam_tensor(w.data(), nullptr, w.size(), grad.data(), st, eta, p);
}

namespace {

// delta over a layer's input units given delta over its outputs (through W).
std::vector<double> backprop_fc(const LayerSpec& spec, std::span<const float> w,
                                std::span<const double> dh) {
  const int n_in = spec.in_size(), n_out = spec.units;
  std::vector<double> din(n_in, 0.0);
  for (int j = 0; j < n_in; ++j) {
    const float* row = w.data() + (size_t)j * n_out;
    double acc = 0.0;
    for (int i = 0; i < n_out; ++i) acc += (double)row[i] * dh[i];
    din[j] = acc;
  }
  return din;
}

std::vector<double> backprop_conv(const LayerSpec& spec, std::span<const float> w,
                                  std::span<const double> dh) {
  const int in_c = spec.in_shape[0], in_h = spec.in_shape[1], in_w = spec.in_shape[2];
  const int out_c = spec.channels, out_h = spec.out_shape[1], out_w = spec.out_shape[2];
  const int kh = spec.kh, kw = spec.kw;
  std::vector<double> din((size_t)in_c * in_h * in_w, 0.0);
  for (int ic = 0; ic < in_c; ++ic) {
    for (int y = 0; y < in_h; ++y) {
      const int ky_lo = std::max(0, y - out_h + 1), ky_hi = std::min(kh - 1, y);
      for (int x = 0; x < in_w; ++x) {
        const int kx_lo = std::max(0, x - out_w + 1), kx_hi = std::min(kw - 1, x);
        double acc = 0.0;
        for (int oc = 0; oc < out_c; ++oc) {
          const float* wk = w.data() + ((size_t)oc * in_c + ic) * kh * kw;
          const double* dmap = dh.data() + (size_t)oc * out_h * out_w;
          for (int ky = ky_lo; ky <= ky_hi; ++ky)
            for (int kx = kx_lo; kx <= kx_hi; ++kx)
              acc += (double)wk[(size_t)ky * kw + kx] * dmap[(size_t)(y - ky) * out_w + (x - kx)];
        }
        din[((size_t)ic * in_h + y) * in_w + x] = acc;
      }
    }
  }
  return din;
}

// Routes delta backwards through an OR pool: split equally among the window's
// inputs that spiked at least once during the sample; dead windows get none.
std::vector<double> backroute_pool(const LayerSpec& spec, std::span<const double> dout,
                                   std::span<const uint32_t> in_spike_counts) {
  const int c = spec.in_shape[0], in_h = spec.in_shape[1], in_w = spec.in_shape[2];
  const int out_h = spec.out_shape[1], out_w = spec.out_shape[2];
  const int k = spec.pool_k;
  std::vector<double> din((size_t)c * in_h * in_w, 0.0);
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        const double d = dout[((size_t)ch * out_h + oy) * out_w + ox];
        if (d == 0.0) continue;
        int active = 0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            active += in_spike_counts[((size_t)ch * in_h + oy * k + dy) * in_w + ox * k + dx] > 0;
        if (!active) continue;
        const double share = d / active;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx) {
            const size_t idx = ((size_t)ch * in_h + oy * k + dy) * in_w + ox * k + dx;
            if (in_spike_counts[idx] > 0) din[idx] += share;
          }
      }
    }
  }
  return din;
}

}  // namespace

std::vector<std::vector<double>> pseudo_bp_deltas(const Network& net, const Trace& trace,
                                                  std::span<const double> output_err) {
  const size_t k_layers = net.learnable.size();
  if (trace.layers.size() != k_layers)
    throw ContractError("pseudo_bp_deltas: trace does not match network");
  if ((int)output_err.size() != net.num_classes())
    throw ContractError("pseudo_bp_deltas: output error size mismatch");
  const double inv_t = 1.0 / trace.t_window;

  std::vector<std::vector<double>> out(k_layers);
  std::vector<double> delta(output_err.begin(), output_err.end());
  for (size_t li = k_layers; li-- > 0;) {
    const int idx = net.learnable[li];
    const LayerSpec& l = net.layers[idx];
    const LayerTrace& lt = trace.layers[li];
    const int n = l.out_size();
    if ((int)delta.size() != n)
      throw ContractError("pseudo_bp_deltas: delta size mismatch while chaining");

    // Gate by the window-mean surrogate factor.
    std::vector<double>& dh = out[li];
    dh.resize(n);
    for (int u = 0; u < n; ++u) dh[u] = delta[u] * (lt.phi_sum[u] * inv_t);

    if (li > 0) {
      std::vector<double> din = l.kind == LayerKind::fc ? backprop_fc(l, net.weights[idx], dh)
                                                        : backprop_conv(l, net.weights[idx], dh);
      // Cross any pool sitting between this layer and the previous learnable one.
      for (int j = idx - 1; j > net.learnable[li - 1]; --j) {
        const LayerSpec& p = net.layers[j];
        if (p.kind != LayerKind::pool)
          throw ContractError("pseudo_bp_deltas: unexpected layer inside chain");
        din = backroute_pool(p, din, trace.layers[li - 1].out_count);
      }
      delta = std::move(din);
    }
  }
  return out;
}

uint64_t pseudo_bp_accumulate(const Network& net, const Trace& trace,
                              std::span<const double> output_err,
                              std::vector<std::vector<double>>& grad_acc) {
  const size_t k_layers = net.learnable.size();
  if (grad_acc.size() != k_layers)
    throw ContractError("pseudo_bp_accumulate: accumulators do not match network");
  const std::vector<std::vector<double>> dh = pseudo_bp_deltas(net, trace, output_err);
  for (size_t li = 0; li < k_layers; ++li) {
    const int idx = net.learnable[li];
    const LayerSpec& l = net.layers[idx];
    if (grad_acc[li].size() != net.weight_count(idx))
      throw ContractError("pseudo_bp_accumulate: accumulator size mismatch");
    if (l.kind == LayerKind::fc)
      local_grad_fc(l, trace.layers[li], dh[li], trace.t_window, grad_acc[li]);
    else
      local_grad_conv(l, trace.layers[li], dh[li], trace.t_window, grad_acc[li]);
  }
  return pseudo_bp_update_ops(net);
}

uint64_t pseudo_bp_update_ops(const Network& net) {
  // Every layer's update pays its gradient elements, its surrogate gating,
  // and the full chain of matvecs from the output down to itself, with no
  // sharing between layers -- which is why the total grows superlinearly
  // with depth while the projected-feedback rules stay affine.
  uint64_t ops = 0;
  const size_t k_layers = net.learnable.size();
  for (size_t li = 0; li < k_layers; ++li) {
    const int idx = net.learnable[li];
    const LayerSpec& l = net.layers[idx];
    ops += net.weight_count(idx) + (uint64_t)l.out_size();
    for (size_t j = li + 1; j < k_layers; ++j)
      ops += net.weight_count(net.learnable[j]);
  }
  return ops;
}

PbpGrads pseudo_bp_grads(const Network& net, const Trace& trace,
                         std::span<const double> output_err) {
  PbpGrads out;
  out.grads.resize(net.learnable.size());
  for (size_t li = 0; li < net.learnable.size(); ++li)
    out.grads[li].assign(net.weight_count(net.learnable[li]), 0.0);
  out.update_ops = pseudo_bp_accumulate(net, trace, output_err, out.grads);
  return out;
}

uint64_t tp_update_ops(const Network& net) {
  uint64_t ops = 0;
  const int classes = net.num_classes();
  for (size_t li = 0; li < net.learnable.size(); ++li) {
    const int idx = net.learnable[li];
    ops += net.weight_count(idx);
    if (li + 1 < net.learnable.size())  // hidden layers pay the projection matvec
      ops += (uint64_t)net.layers[idx].out_size() * classes;
  }
  return ops;
}

void FcGradBatch::reset(int n_in, int n_out) {
  n_in_ = n_in;
  n_out_ = n_out;
  count_ = 0;
}

void FcGradBatch::add(std::span<const uint32_t> in_count, int t_window,
                      std::span<const double> e) {
  if ((int)in_count.size() != n_in_ || (int)e.size() != n_out_)
    throw ContractError("FcGradBatch::add: dimension mismatch");
  const double inv_t = 1.0 / t_window;
  rates_.resize((size_t)(count_ + 1) * n_in_);
  errs_.resize((size_t)(count_ + 1) * n_out_);
  double* r = rates_.data() + (size_t)count_ * n_in_;
  for (int j = 0; j < n_in_; ++j) r[j] = in_count[j] * inv_t;
  std::copy(e.begin(), e.end(), errs_.data() + (size_t)count_ * n_out_);
  ++count_;
}

void FcGradBatch::flush(std::span<double> grad) {
  if (grad.size() != (size_t)n_in_ * n_out_)
    throw ContractError("FcGradBatch::flush: gradient size mismatch");
  // Each weight row is visited once; within it samples run in insertion order,
  // skipping silent inputs -- the exact per-weight term order of sequential
  // local_grad_fc calls.
  for (int j = 0; j < n_in_; ++j) {
    double* row = grad.data() + (size_t)j * n_out_;
    for (int s = 0; s < count_; ++s) {
      const double rate = rates_[(size_t)s * n_in_ + j];
      if (rate == 0.0) continue;
      const double* e = errs_.data() + (size_t)s * n_out_;
      for (int i = 0; i < n_out_; ++i) row[i] += rate * e[i];
    }
  }
  count_ = 0;
}

}  // namespace brpsnn
