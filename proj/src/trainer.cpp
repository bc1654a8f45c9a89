#include "brpsnn/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace brpsnn {

int argmax_lowest(std::span<const double> v) {
  if (v.empty()) throw ContractError("argmax_lowest: empty vector");
  int best = 0;
  for (int i = 1; i < (int)v.size(); ++i)
    if (v[i] > v[best]) best = i;  // strict: ties resolve to the lowest index
  return best;
}

SpikeTrain encode_sample(const Dataset& ds, size_t idx, const RunConfig& cfg,
                         bool eval_stream, int epoch) {
  if (idx >= ds.size()) throw ContractError("encode_sample: index out of range");
  if (ds.modality == Modality::event) return ds.events[idx];
  Rng rng = eval_stream
                ? Rng(cfg.seed, {stream::kEvalEncode, (uint64_t)idx})
                : Rng(cfg.seed, {stream::kTrainEncode, (uint64_t)epoch, (uint64_t)idx});
  return rate_encode(ds.sample(idx), cfg.encoder, rng);
}

TrainState init_state(const RunConfig& cfg, const Dataset& train) {
  TrainState st;
  st.net = Network::build(cfg.topology, train.shape, cfg.lif, cfg.init_gain, cfg.seed);
  if (st.net.num_classes() != train.num_classes)
    throw ConfigError("topology output size " + std::to_string(st.net.num_classes()) +
                      " does not match dataset classes " + std::to_string(train.num_classes));
  st.fb = init_feedback(st.net, cfg.seed, cfg.fb_norm, cfg.fb_gain);
  st.opt.clear();
  for (int idx : st.net.learnable)
    st.opt.emplace_back(st.net.weight_count(idx));
  return st;
}

namespace {

struct SampleResult {
  Trace trace;
  SpikeTrain label_train;
  SpikeTrain out_train;
  std::vector<double> y;
  int label = 0;
  uint64_t fwd_macs = 0;
  bool correct = false;
  double loss = 0.0;
};

void forward_one(const Network& net, const Dataset& ds, size_t idx, const RunConfig& cfg,
                 bool eval_stream, int epoch, bool keep_steps, SampleResult& out) {
  const SpikeTrain input = encode_sample(ds, idx, cfg, eval_stream, epoch);
  // Record only the running sums the consumer will read back: evaluation uses
  // just spike counts, the chained rule reads surrogate sums, the projected
  // rules read membrane sums, and the step-resolved path carries full steps.
  bool with_h = false, with_phi = false, with_in = false;
  if (!eval_stream && !keep_steps) {
    with_in = true;
    (cfg.mode == TpMode::pseudo_bp ? with_phi : with_h) = true;
  }
  out.trace.init(net, input.t_window, keep_steps, with_h, with_phi, with_in);
  out.fwd_macs = 0;
  out.out_train = network_forward(net, input, &out.trace, &out.fwd_macs);
  out.label = ds.labels[idx];
  out.label_train = label_encode(out.label, net.num_classes(), input.t_window);
  out.y = firerate(out.out_train);
  const std::vector<double> ybar = firerate(out.label_train);
  out.correct = argmax_lowest(out.y) == out.label;
  double loss = 0.0;
  for (size_t c = 0; c < out.y.size(); ++c) {
    const double d = out.y[c] - ybar[c];
    loss += d * d;
  }
  out.loss = 0.5 * loss;
}

// Runs forward_one over a batch, optionally across threads.  Results land in
// batch order, so downstream accumulation is thread-count independent.
void forward_batch(const Network& net, const Dataset& ds,
                   const std::vector<int32_t>& batch, const RunConfig& cfg,
                   bool eval_stream, int epoch, bool keep_steps,
                   std::vector<SampleResult>& results) {
  results.resize(batch.size());
  const int n_threads = std::min<int>(cfg.threads, (int)batch.size());
  if (n_threads <= 1) {
    for (size_t s = 0; s < batch.size(); ++s)
      forward_one(net, ds, (size_t)batch[s], cfg, eval_stream, epoch, keep_steps, results[s]);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<size_t> next{0};
  for (int w = 0; w < n_threads; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const size_t s = next.fetch_add(1);
        if (s >= batch.size()) return;
        forward_one(net, ds, (size_t)batch[s], cfg, eval_stream, epoch, keep_steps, results[s]);
      }
    });
  for (auto& t : pool) t.join();
}

// Accumulates one sample's gradients for the projected-feedback family.
// fc-layer contributions are queued on fc_batch (flushed once per batch);
// conv layers and the step-resolved path write straight into grad_acc.
void accumulate_tp_grads(const Network& net, const Feedback& fb, const SampleResult& sr,
                         const RunConfig& cfg, std::vector<std::vector<double>>& grad_acc,
                         std::vector<FcGradBatch>& fc_batch) {
  const std::vector<double> tp = compute_tp(cfg.mode, sr.label_train, sr.out_train);
  const int classes = net.num_classes();
  const int t_window = sr.out_train.t_window;
  for (size_t li = 0; li < net.learnable.size(); ++li) {
    const int idx = net.learnable[li];
    const LayerSpec& l = net.layers[idx];
    const LayerTrace& lt = sr.trace.layers[li];
    const bool output_layer = li + 1 == net.learnable.size();
    // Hidden layers project the teaching vector through fixed feedback; the
    // output layer routes it one-to-one.
    std::vector<double> target =
        output_layer ? std::vector<double>(tp.begin(), tp.end())
                     : project_target(fb.b[li], l.out_size(), classes, tp);
    if (cfg.mode == TpMode::brp && cfg.tp_apply == TpApply::per_step) {
      if (l.kind == LayerKind::fc)
        local_grad_fc_steps(l, sr.trace, (int)li, target, grad_acc[li]);
      else
        local_grad_conv_steps(l, sr.trace, (int)li, target, grad_acc[li]);
      continue;
    }
    // brp regresses toward the projected target; err/sign project a signal
    // that is already the residual, which makes a perfectly matched output
    // (tp = 0) an exact fixed point.
    const std::vector<double> e =
        cfg.mode == TpMode::brp ? residual(lt, target, t_window) : std::move(target);
    if (l.kind == LayerKind::fc)
      fc_batch[li].add(lt.in_count, t_window, e);
    else
      local_grad_conv(l, lt, e, t_window, grad_acc[li]);
  }
}

}  // namespace

EpochResult train_epoch(TrainState& st, const Dataset& train, const RunConfig& cfg,
                        int epoch) {
  Network& net = st.net;
  const size_t k_layers = net.learnable.size();
  const auto batches = make_batches(train.size(), cfg.batch, cfg.shuffle, cfg.seed, epoch);
  const bool keep_steps = cfg.tp_apply == TpApply::per_step && cfg.mode == TpMode::brp;

  std::vector<std::vector<double>> grad_acc(k_layers);
  for (size_t li = 0; li < k_layers; ++li)
    grad_acc[li].assign(net.weight_count(net.learnable[li]), 0.0);

  // fc gradients are rank-1 per sample, so their terms are queued and added
  // in one pass per batch; each weight still receives the same terms in the
  // same order as immediate accumulation would give it.
  std::vector<FcGradBatch> fc_batch(k_layers);
  const bool defer_fc = !keep_steps;
  if (defer_fc)
    for (size_t li = 0; li < k_layers; ++li) {
      const LayerSpec& l = net.layers[net.learnable[li]];
      if (l.kind == LayerKind::fc) fc_batch[li].reset(l.in_size(), l.units);
    }

  EpochResult res;
  res.ops.k = (int)k_layers;
  res.ops.mode = cfg.mode;
  size_t correct = 0;
  double loss_sum = 0.0;
  std::vector<double> silent_sums(k_layers, 0.0);
  std::vector<SampleResult> results;

  for (const auto& batch : batches) {
    forward_batch(net, train, batch, cfg, /*eval_stream=*/false, epoch, keep_steps, results);

    for (size_t li = 0; li < k_layers; ++li)
      std::fill(grad_acc[li].begin(), grad_acc[li].end(), 0.0);

    for (const SampleResult& sr : results) {
      correct += sr.correct;
      loss_sum += sr.loss;
      res.ops.forward_ops += sr.fwd_macs;
      for (size_t li = 0; li < k_layers; ++li)
        silent_sums[li] += silent_fraction(sr.trace.layers[li].out_count);
      if (cfg.mode == TpMode::pseudo_bp) {
        std::vector<double> err(sr.y.size());
        const std::vector<double> ybar = firerate(sr.label_train);
        for (size_t c = 0; c < err.size(); ++c) err[c] = sr.y[c] - ybar[c];
        const auto deltas = pseudo_bp_deltas(net, sr.trace, err);
        for (size_t li = 0; li < k_layers; ++li) {
          const LayerSpec& l = net.layers[net.learnable[li]];
          const int t_window = sr.out_train.t_window;
          if (l.kind == LayerKind::fc)
            fc_batch[li].add(sr.trace.layers[li].in_count, t_window, deltas[li]);
          else
            local_grad_conv(l, sr.trace.layers[li], deltas[li], t_window, grad_acc[li]);
        }
        res.ops.update_ops += pseudo_bp_update_ops(net);
      } else {
        accumulate_tp_grads(net, st.fb, sr, cfg, grad_acc, fc_batch);
        res.ops.update_ops += tp_update_ops(net);
      }
    }

    if (defer_fc)
      for (size_t li = 0; li < k_layers; ++li)
        if (fc_batch[li].pending()) fc_batch[li].flush(grad_acc[li]);

    const double inv_b = 1.0 / (double)batch.size();
    for (size_t li = 0; li < k_layers; ++li) {
      const int idx = net.learnable[li];
      for (double& g : grad_acc[li]) g *= inv_b;
      const double eta =
          net.layers[idx].kind == LayerKind::conv ? cfg.eta_conv : cfg.eta_fc;
      adam_update(std::span<float>(net.weights[idx]), grad_acc[li], st.opt[li], eta);
    }
  }

  res.accuracy = train.size() ? (double)correct / (double)train.size() : 0.0;
  res.loss = train.size() ? loss_sum / (double)train.size() : 0.0;
  for (size_t li = 0; li < k_layers; ++li) silent_sums[li] /= std::max<size_t>(1, train.size());
  for (size_t li = 0; li < k_layers; ++li) {
    const LayerSpec& l = net.layers[net.learnable[li]];
    if (l.kind == LayerKind::conv && res.silent_conv == 0.0)
      res.silent_conv = silent_sums[li];
    if (l.kind == LayerKind::fc && li + 1 < k_layers && res.silent_fc == 0.0)
      res.silent_fc = silent_sums[li];
  }
  return res;
}

EvalResult evaluate(const Network& net, const Dataset& test, const RunConfig& cfg) {
  EvalResult res;
  res.silent_per_layer.assign(net.learnable.size(), 0.0);
  if (test.size() == 0) return res;

  const auto batches = make_batches(test.size(), std::max(cfg.batch, 1), false, 0, 0);
  std::vector<SampleResult> results;
  size_t correct = 0;
  double loss_sum = 0.0;
  for (const auto& batch : batches) {
    forward_batch(net, test, batch, cfg, /*eval_stream=*/true, 0, false, results);
    for (const SampleResult& sr : results) {
      correct += sr.correct;
      loss_sum += sr.loss;
      res.fwd_ops += sr.fwd_macs;
      for (size_t li = 0; li < net.learnable.size(); ++li)
        res.silent_per_layer[li] += silent_fraction(sr.trace.layers[li].out_count);
    }
  }
  res.accuracy = (double)correct / (double)test.size();
  res.loss = loss_sum / (double)test.size();
  for (double& s : res.silent_per_layer) s /= (double)test.size();
  for (size_t li = 0; li < net.learnable.size(); ++li) {
    const LayerSpec& l = net.layers[net.learnable[li]];
    if (l.kind == LayerKind::conv && res.silent_conv == 0.0)
      res.silent_conv = res.silent_per_layer[li];
    if (l.kind == LayerKind::fc && li + 1 < net.learnable.size() && res.silent_fc == 0.0)
      res.silent_fc = res.silent_per_layer[li];
  }
  return res;
}

TrainOutcome run_training(const RunConfig& cfg, const DataPair& data, std::ostream* log,
                          const std::function<bool(int, const EvalResult&)>& stop) {
  TrainOutcome out;
  out.state = init_state(cfg, data.train);
  if (data.test.num_classes != data.train.num_classes ||
      data.test.shape != data.train.shape)
    throw ConfigError("train and test sets disagree on shape or classes");

  const uint64_t fb_mark = feedback_fingerprint(out.state.fb);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const EpochResult tr = train_epoch(out.state, data.train, cfg, epoch);
    const auto t1 = std::chrono::steady_clock::now();
    const uint64_t wall =
        cfg.deterministic
            ? 0
            : (uint64_t)std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();

    out.rows.push_back({epoch, "train", tr.accuracy, tr.loss, tr.silent_conv, tr.silent_fc,
                        tr.ops.forward_ops, tr.ops.update_ops, wall});

    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      const EvalResult ev = evaluate(out.state.net, data.test, cfg);
      out.rows.push_back({epoch, "test", ev.accuracy, ev.loss, ev.silent_conv, ev.silent_fc,
                          ev.fwd_ops, 0, 0});
      if (log)
        *log << "epoch " << epoch << " train_acc=" << tr.accuracy
             << " test_acc=" << ev.accuracy << " loss=" << tr.loss
             << " silent_conv=" << ev.silent_conv << " silent_fc=" << ev.silent_fc
             << std::endl;
      if (stop && stop(epoch, ev)) break;
    } else if (log) {
      *log << "epoch " << epoch << " train_acc=" << tr.accuracy << " loss=" << tr.loss
           << std::endl;
    }

    if (feedback_fingerprint(out.state.fb) != fb_mark)
      throw std::logic_error("feedback matrices mutated during training");
  }
  return out;
}

std::vector<std::vector<double>> silent_sweep(const Network& net,
                                              const std::vector<double>& proportions,
                                              int n_probes, int t_window, uint64_t seed) {
  if (n_probes < 1 || t_window < 1)
    throw ContractError("silent_sweep: probes and window must be positive");
  const int features = net.input_shape[0] * net.input_shape[1] * net.input_shape[2];
  std::vector<std::vector<double>> fractions;  // [proportion][learnable layer]

  // Common random numbers across proportions: one uniform per (probe, t, i),
  // spike iff u < p.  Raising p can only add spikes, never remove them.
  for (const double p : proportions) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ContractError("silent_sweep: proportions must lie in [0,1]");
    std::vector<double> mean(net.learnable.size(), 0.0);
    Trace trace;
    for (int probe = 0; probe < n_probes; ++probe) {
      Rng rng(seed, {stream::kProbe, (uint64_t)probe});
      SpikeTrain input(t_window, features);
      for (int t = 0; t < t_window; ++t) {
        uint8_t* row = input.step(t).data();
        for (int i = 0; i < features; ++i) row[i] = rng.uniform() < p;
      }
      trace.init(net, t_window, false, false, false, false);  // spike counts only
      network_forward(net, input, &trace);
      for (size_t li = 0; li < net.learnable.size(); ++li)
        mean[li] += silent_fraction(trace.layers[li].out_count);
    }
    for (double& m : mean) m /= n_probes;
    fractions.push_back(std::move(mean));
  }
  return fractions;
}

OpCount bench_counters(TpMode mode, int width, int depth, int batch, uint64_t seed) {
  if (depth < 2) throw ContractError("bench_counters: depth must be at least 2");
  std::string topo;
  for (int i = 0; i < depth - 1; ++i) topo += "FC" + std::to_string(width) + "-";
  topo += "FC2";

  RunConfig cfg;
  cfg.topology = topo;
  cfg.mode = mode;
  cfg.epochs = 1;
  cfg.batch = batch;
  cfg.seed = seed;
  cfg.data_kind = "synth_ramp";

  Dataset train = synth_temporal("ramp", std::max(2, batch / 2), seed);
  TrainState st = init_state(cfg, train);
  const EpochResult res = train_epoch(st, train, cfg, 1);
  return res.ops;
}

}  // namespace brpsnn
