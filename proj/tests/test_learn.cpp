#include "doctest.h"

#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "brpsnn/encode.hpp"
#include "brpsnn/errors.hpp"
#include "brpsnn/learn.hpp"
#include "brpsnn/rng.hpp"

using namespace brpsnn;

namespace {

SpikeTrain train_with_rate(int t_window, std::vector<int> counts) {
  SpikeTrain s(t_window, (int)counts.size());
  for (size_t u = 0; u < counts.size(); ++u)
    for (int t = 0; t < counts[u]; ++t) s.set(t, (int)u, 1);
  return s;
}

}  // namespace

TEST_CASE("teaching vector: brp is the label rate, independent of output") {
  SpikeTrain label = label_encode(3, 10, 20);
  SpikeTrain out_a(20, 10), out_b = train_with_rate(20, {20, 0, 5, 0, 0, 0, 0, 0, 0, 7});
  auto tp_a = compute_tp(TpMode::brp, label, out_a);
  auto tp_b = compute_tp(TpMode::brp, label, out_b);
  CHECK(tp_a == tp_b);
  for (int k = 0; k < 10; ++k) CHECK(tp_a[k] == (k == 3 ? 1.0 : 0.0));
}

TEST_CASE("teaching vector: err vanishes when output matches the label rates") {
  SpikeTrain label = label_encode(2, 4, 10);
  auto tp = compute_tp(TpMode::err, label, label);
  for (double e : tp) CHECK(e == 0.0);
}

TEST_CASE("teaching vector: err and sign arithmetic") {
  // T=20, output neuron 0 fires 10 times, label is class 0 -> 0.5 - 1.0 = -0.5.
  SpikeTrain label = label_encode(0, 10, 20);
  SpikeTrain out = train_with_rate(20, {10, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  auto err = compute_tp(TpMode::err, label, out);
  CHECK(err[0] == doctest::Approx(-0.5));
  for (int k = 1; k < 10; ++k) CHECK(err[k] == 0.0);
  auto sgn = compute_tp(TpMode::sign, label, out);
  CHECK(sgn[0] == -1.0);
  for (int k = 1; k < 10; ++k) CHECK(sgn[k] == 0.0);  // sign(0) = 0
}

TEST_CASE("feedback: determinism, shapes, centered entries") {
  LifParams p;
  Network net = Network::build("FC1000-FC10", {1, 28, 28}, p, 1.0, 11);
  Feedback a = init_feedback(net, 5), b = init_feedback(net, 5), c = init_feedback(net, 6);
  REQUIRE(a.b.size() == net.learnable.size());
  CHECK(a.b[0].size() == (size_t)1000 * 10);
  CHECK(a.b[1].empty());  // output layer needs no projection
  CHECK(a.b[0] == b.b[0]);
  CHECK(a.b[0] != c.b[0]);
  CHECK(feedback_fingerprint(a) == feedback_fingerprint(b));
  CHECK(feedback_fingerprint(a) != feedback_fingerprint(c));

  // Mean of U(-1,1)/sqrt(n) entries over 10^6 draws: sigma_mean = (1/sqrt(3n))/1000.
  Network wide = Network::build("FC100000-FC10", {1, 1, 1}, p, 1.0, 12);
  Feedback f = init_feedback(wide, 7);
  REQUIRE(f.b[0].size() == 1000000);
  double mean = 0.0;
  for (float x : f.b[0]) mean += x;
  mean /= (double)f.b[0].size();
  const double sigma_mean = (1.0 / std::sqrt(3.0 * 100000.0)) / 1000.0;
  CHECK(std::abs(mean) < 3.0 * sigma_mean);
}

TEST_CASE("feedback scaling modes") {
  LifParams p;
  Network net = Network::build("FC400-FC10", {1, 1, 4}, p, 1.0, 13);
  Feedback inv = init_feedback(net, 5, FeedbackNorm::inv_sqrt, 1.0);
  Feedback abs = init_feedback(net, 5, FeedbackNorm::absolute, 1.0);
  const double bound_inv = 1.0 / std::sqrt(400.0);
  double max_inv = 0.0, max_abs = 0.0;
  for (size_t i = 0; i < inv.b[0].size(); ++i) {
    max_inv = std::max(max_inv, (double)std::abs(inv.b[0][i]));
    max_abs = std::max(max_abs, (double)std::abs(abs.b[0][i]));
    CHECK(abs.b[0][i] == doctest::Approx(inv.b[0][i] * std::sqrt(400.0)).epsilon(1e-6));
  }
  CHECK(max_inv <= bound_inv);
  CHECK(max_abs > 0.9);  // uniform(-1,1) max over 4000 draws
}

TEST_CASE("target projection") {
  std::vector<double> tp(10, 0.0);
  std::vector<float> b(5 * 10);
  Rng rng(2, {3});
  for (auto& x : b) x = (float)rng.uniform(-1.0, 1.0);

  auto zero = project_target(b, 5, 10, tp);
  for (double t : zero) CHECK(t == 0.0);

  // Identity fixture: 3x3, tp = e2 -> target = e2.
  std::vector<float> eye(9, 0.0f);
  eye[0] = eye[4] = eye[8] = 1.0f;
  std::vector<double> e2{0.0, 0.0, 1.0};
  auto t2 = project_target(eye, 3, 3, e2);
  CHECK(t2 == e2);

  // Random matrix against a brute-force row dot.
  tp = {0.1, -0.2, 0.3, 0.0, 0.5, -0.6, 0.7, 0.8, -0.9, 1.0};
  auto got = project_target(b, 5, 10, tp);
  for (int u = 0; u < 5; ++u) {
    double acc = 0.0;
    for (int k = 0; k < 10; ++k) acc += (double)b[u * 10 + k] * tp[k];
    CHECK(got[u] == acc);
  }
}

TEST_CASE("local gradient: fixed point and hand arithmetic") {
  auto layers = parse_topology("FC1");
  resolve_shapes(layers, {1, 1, 1});
  const LayerSpec& l = layers[0];

  LayerTrace tr;
  tr.h_sum = {0.5 * 4};  // h-bar = 0.5 over T=4
  tr.phi_sum = {4.0};
  tr.out_count = {0};
  tr.in_count = {4};  // s-bar = 1

  std::vector<double> target{1.0};
  auto e = residual(tr, target, 4);
  CHECK(e[0] == doctest::Approx(-0.5));

  std::vector<double> grad(1, 0.0);
  local_grad_fc(l, tr, e, 4, grad);
  CHECK(grad[0] == doctest::Approx(-0.5));
  // Plain gradient step with eta = 0.1 moves the weight up by 0.05.
  CHECK(-0.1 * grad[0] == doctest::Approx(0.05));

  // h-bar == target -> zero gradient.
  std::vector<double> t2{0.5};
  auto e2 = residual(tr, t2, 4);
  std::vector<double> g2(1, 0.0);
  local_grad_fc(l, tr, e2, 4, g2);
  CHECK(g2[0] == 0.0);
}

TEST_CASE("local gradient matches central finite differences sub-threshold") {
  // Weights on a 2^-10 grid keep w +/- h exact in f32; all potentials stay
  // below threshold so the window trace is smooth in w.
  LifParams p;
  Network net = Network::build("FC3-FC2", {1, 1, 4}, p, 1.0, 17);
  const int T = 1;  // single step: h-bar = W . s exactly, no reset anywhere
  auto grid = [](double x) { return std::round(x * 1024.0) / 1024.0; };
  for (auto& w : net.weights[0]) w = (float)grid(0.05 * w);
  for (auto& w : net.weights[1]) w = (float)grid(0.05 * w);

  SpikeTrain in(T, 4);
  in.set(0, 0, 1);
  in.set(0, 2, 1);
  std::vector<double> target{0.07, -0.04, 0.02};

  auto loss_at = [&](int layer, size_t k, float w_val) {
    Network n2 = net;
    n2.weights[layer][k] = w_val;
    Trace tr;
    tr.init(n2, T);
    network_forward(n2, in, &tr);
    const LayerTrace& lt = tr.layers[0];
    double L = 0.0;
    for (size_t u = 0; u < lt.h_sum.size(); ++u) {
      const double d = lt.h_sum[u] / T - target[u];
      L += 0.5 * d * d;
    }
    return L;
  };

  Trace tr;
  tr.init(net, T);
  network_forward(net, in, &tr);
  auto e = residual(tr.layers[0], target, T);
  std::vector<double> grad(net.weights[0].size(), 0.0);
  local_grad_fc(net.layers[0], tr.layers[0], e, T, grad);

  const double h = 1.0 / 1024.0;
  for (size_t k = 0; k < grad.size(); ++k) {
    const float w0 = net.weights[0][k];
    const double fd = (loss_at(0, k, (float)(w0 + h)) - loss_at(0, k, (float)(w0 - h))) / (2 * h);
    if (std::abs(fd) > 1e-12)
      CHECK(std::abs(grad[k] - fd) / std::abs(fd) < 1e-5);
    else
      CHECK(std::abs(grad[k]) < 1e-9);
  }
}

TEST_CASE("step-resolved local gradient reduces to the window form when membranes are constant") {
  LifParams p;
  p.v_th = 100.0;  // no spikes, no reset
  p.g = 0.0;   // v = input each step -> identical membranes across steps
  Network net = Network::build("FC3-FC2", {1, 1, 4}, p, 1.0, 23);
  const int T = 6;
  SpikeTrain in(T, 4);
  for (int t = 0; t < T; ++t) {
    in.set(t, 1, 1);
    in.set(t, 3, 1);
  }
  Trace tr;
  tr.init(net, T, /*keep_steps=*/true);
  network_forward(net, in, &tr);
  std::vector<double> target{0.2, -0.1, 0.05};
  auto e = residual(tr.layers[0], target, T);
  std::vector<double> g_window(net.weights[0].size(), 0.0);
  local_grad_fc(net.layers[0], tr.layers[0], e, T, g_window);
  std::vector<double> g_steps(net.weights[0].size(), 0.0);
  local_grad_fc_steps(net.layers[0], tr, 0, target, g_steps);
  for (size_t k = 0; k < g_window.size(); ++k)
    CHECK(g_steps[k] == doctest::Approx(g_window[k]).epsilon(1e-12));
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  std::vector<double> w{0.3, -0.2};
  std::vector<double> g{0.0, 0.0};
  AdamState st(2);
  adam_update(w, g, st, 0.01);
  CHECK(w[0] == 0.3);
  CHECK(w[1] == -0.2);
}

TEST_CASE("adam: first step moves by about eta in the gradient's direction") {
  std::vector<double> w{0.0, 0.0};
  std::vector<double> g{0.4, -0.002};
  AdamState st(2);
  adam_update(w, g, st, 0.01);
  // Bias-corrected first step: -eta * g / (|g| + eps') ~= -eta * sign(g).
  CHECK(w[0] == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(w[1] == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("adam matches the scalar hand recursion to 1e-12") {
  AdamParams p;
  std::vector<double> w{0.5};
  AdamState st(1);
  double m = 0.0, v = 0.0, w_ref = 0.5;
  const double grads[2] = {0.3, -0.1};
  for (int t = 1; t <= 2; ++t) {
    const double g = grads[t - 1];
    std::vector<double> gv{g};
    adam_update(w, gv, st, 0.05, p);
    m = p.beta1 * m + (1 - p.beta1) * g;
    v = p.beta2 * v + (1 - p.beta2) * g * g;
    const double mh = m / (1 - std::pow(p.beta1, t));
    const double vh = v / (1 - std::pow(p.beta2, t));
    w_ref -= 0.05 * mh / (std::sqrt(vh) + p.eps);
    CHECK(std::abs(w[0] - w_ref) < 1e-12);
  }
}

TEST_CASE("adam float overload tracks the double recursion within float rounding") {
  AdamParams p;
  std::vector<float> wf{0.25f};
  std::vector<double> wd{0.25};
  AdamState sf(1), sd(1);
  Rng rng(9, {31});
  for (int t = 1; t <= 20; ++t) {
    std::vector<double> g{rng.uniform(-1.0, 1.0)};
    adam_update(wf, g, sf, 0.01, p);
    adam_update(wd, g, sd, 0.01, p);
    CHECK(std::abs((double)wf[0] - wd[0]) < 1e-5);
  }
}

TEST_CASE("pseudo-bp: zero output error yields zero gradients") {
  LifParams p;
  Network net = Network::build("FC8-FC4", {1, 1, 6}, p, 1.0, 29);
  SpikeTrain in(5, 6);
  Rng rng(1, {77});
  for (int t = 0; t < 5; ++t)
    for (int j = 0; j < 6; ++j) in.set(t, j, rng.below(2));
  Trace tr;
  tr.init(net, 5);
  network_forward(net, in, &tr);
  std::vector<double> err(4, 0.0);
  auto out = pseudo_bp_grads(net, tr, err);
  for (auto& g : out.grads)
    for (double x : g) CHECK(x == 0.0);
}

TEST_CASE("pseudo-bp on a single fc layer reduces to the surrogate delta rule") {
  LifParams p;
  Network net = Network::build("FC3", {1, 1, 4}, p, 1.0, 31);
  const int T = 8;
  SpikeTrain in(T, 4);
  Rng rng(2, {78});
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < 4; ++j) in.set(t, j, rng.below(2));
  Trace tr;
  tr.init(net, T);
  network_forward(net, in, &tr);
  std::vector<double> err{0.3, -0.2, 0.1};
  auto out = pseudo_bp_grads(net, tr, err);
  const LayerTrace& lt = tr.layers[0];
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 3; ++i) {
      const double want = err[i] * (lt.phi_sum[i] / T) * ((double)lt.in_count[j] / T);
      CHECK(out.grads[0][j * 3 + i] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("pseudo-bp two-layer chain matches finite differences of a smoothed network") {
  // Smoothed oracle: unit value = clamp(W.x, 0, 1) with the same quadratic
  // loss.  Membranes are placed a distance delta inside the clamp saturation
  // points {0, 1} -- still strictly inside the surrogate window -- so binary
  // spikes equal the smoothed values to delta, while the FD probe (smaller
  // than delta, taken in double) never crosses a kink.
  LifParams p;
  const int T = 1;
  const double delta = 1e-5, h = 5e-6;
  // 2 inputs -> 2 hidden -> 1 output.
  Network net = Network::build("FC2-FC1", {1, 1, 2}, p, 1.0, 37);
  net.weights[0] = {(float)(1.0 - delta), (float)delta,  // input 0 -> hidden 0,1
                    0.0f, 0.0f};                         // input 1 silent
  net.weights[1] = {(float)(1.0 - delta), (float)delta};
  SpikeTrain in(T, 2);
  in.set(0, 0, 1);

  Trace tr;
  tr.init(net, T);
  SpikeTrain out = network_forward(net, in, &tr);
  CHECK(out.at(0, 0) == 1);  // output membrane ~1 - delta, above threshold

  std::vector<double> label{0.0};  // push the output down
  std::vector<double> err{firerate(out)[0] - label[0]};
  auto got = pseudo_bp_grads(net, tr, err);

  // FD runs on double copies of the weights so probe steps are exact.
  std::vector<double> w0(net.weights[0].begin(), net.weights[0].end());
  std::vector<double> w1(net.weights[1].begin(), net.weights[1].end());
  auto smooth_loss = [&](const std::vector<double>& a, const std::vector<double>& b) {
    auto clamp01 = [](double x) { return x < 0 ? 0.0 : (x > 1 ? 1.0 : x); };
    const double h0 = clamp01(a[0]);  // input 0 fires, input 1 does not
    const double h1 = clamp01(a[1]);
    const double y = clamp01(b[0] * h0 + b[1] * h1);
    return 0.5 * (y - label[0]) * (y - label[0]);
  };
  for (int k = 0; k < 2; ++k) {  // input-0 rows only (input 1 never fires)
    auto wp = w0, wm = w0;
    wp[k] += h;
    wm[k] -= h;
    const double fd = (smooth_loss(wp, w1) - smooth_loss(wm, w1)) / (2 * h);
    CHECK(got.grads[0][k] == doctest::Approx(fd).epsilon(1e-4));
  }
  for (int k = 0; k < 2; ++k) {
    auto wp = w1, wm = w1;
    wp[k] += h;
    wm[k] -= h;
    const double fd = (smooth_loss(w0, wp) - smooth_loss(w0, wm)) / (2 * h);
    CHECK(got.grads[1][k] == doctest::Approx(fd).epsilon(1e-4));
  }
  // Silent rows carry no gradient in either model.
  CHECK(got.grads[0][2] == 0.0);
  CHECK(got.grads[0][3] == 0.0);
}

TEST_CASE("deferred fc batch accumulation is bit-identical to immediate accumulation") {
  auto layers = parse_topology("FC5");
  resolve_shapes(layers, {1, 1, 7});
  const LayerSpec& l = layers[0];
  const int T = 9, n_in = 7, n_out = 5;
  Rng rng(13, {55});

  // Start both accumulators from the same nonzero content so flush() adding
  // (rather than overwriting) is part of what is checked.
  std::vector<double> g_now((size_t)n_in * n_out), g_deferred(g_now.size());
  for (size_t k = 0; k < g_now.size(); ++k) g_now[k] = g_deferred[k] = rng.uniform(-1.0, 1.0);

  FcGradBatch batch;
  batch.reset(n_in, n_out);
  for (int s = 0; s < 12; ++s) {
    LayerTrace lt;
    lt.in_count.resize(n_in);
    for (auto& c : lt.in_count) c = rng.below(3) == 0 ? 0u : (uint32_t)rng.below(T + 1);
    std::vector<double> e(n_out);
    for (auto& x : e) x = rng.uniform(-0.7, 0.7);
    local_grad_fc(l, lt, e, T, g_now);
    batch.add(lt.in_count, T, e);
  }
  CHECK(batch.pending() == 12);
  batch.flush(g_deferred);
  CHECK(batch.pending() == 0);
  CHECK(std::memcmp(g_now.data(), g_deferred.data(), g_now.size() * sizeof(double)) == 0);
}

TEST_CASE("chained deltas plus local gradients reproduce the full chained rule") {
  LifParams p;
  Network net = Network::build("Cov3*3x2-S2-FC6-FC2", {1, 8, 8}, p, 1.5, 53);
  const int T = 6;
  SpikeTrain in(T, 64);
  Rng rng(7, {92});
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < 64; ++j) in.set(t, j, rng.below(3) == 0);
  Trace tr;
  tr.init(net, T);
  network_forward(net, in, &tr);
  std::vector<double> err{0.4, -0.3};

  auto whole = pseudo_bp_grads(net, tr, err);
  auto deltas = pseudo_bp_deltas(net, tr, err);
  REQUIRE(deltas.size() == net.learnable.size());
  for (size_t li = 0; li < net.learnable.size(); ++li) {
    const LayerSpec& l = net.layers[net.learnable[li]];
    std::vector<double> g(net.weight_count(net.learnable[li]), 0.0);
    if (l.kind == LayerKind::fc)
      local_grad_fc(l, tr.layers[li], deltas[li], T, g);
    else
      local_grad_conv(l, tr.layers[li], deltas[li], T, g);
    CHECK(std::memcmp(g.data(), whole.grads[li].data(), g.size() * sizeof(double)) == 0);
  }
  CHECK(whole.update_ops == pseudo_bp_update_ops(net));
}

TEST_CASE("pseudo-bp rejects being asked for a teaching vector") {
  SpikeTrain label = label_encode(0, 2, 4);
  CHECK_THROWS_AS(compute_tp(TpMode::pseudo_bp, label, label), ContractError);
}

TEST_CASE("update-op counts: tp is affine in depth, pseudo-bp superlinear") {
  LifParams p;
  auto stack = [&](int k) {
    std::string topo;
    for (int i = 1; i < k; ++i) topo += "FC64-";
    topo += "FC2";
    return Network::build(topo, {1, 1, 64}, p, 1.0, 41);
  };
  // brp/err/sign: exact affine growth a*k + b.
  const uint64_t t2 = tp_update_ops(stack(2));
  const uint64_t t4 = tp_update_ops(stack(4));
  const uint64_t t8 = tp_update_ops(stack(8));
  CHECK(t4 - t2 == (uint64_t)2 * ((t8 - t4) / 4));
  CHECK((t8 - t4) % 4 == 0);

  // pseudo-bp: second difference strictly positive (superlinear).
  auto pbp_ops = [&](int k) {
    Network net = stack(k);
    SpikeTrain in(2, 64);
    for (int j = 0; j < 64; j += 2) in.set(0, j, 1);
    Trace tr;
    tr.init(net, 2);
    network_forward(net, in, &tr);
    std::vector<double> err(2, 0.5);
    return pseudo_bp_grads(net, tr, err).update_ops;
  };
  const uint64_t p2 = pbp_ops(2), p4 = pbp_ops(4), p8 = pbp_ops(8);
  const double slope_low = (double)(p4 - p2) / 2.0;
  const double slope_high = (double)(p8 - p4) / 4.0;
  CHECK(slope_high > 1.5 * slope_low);
}

TEST_CASE("brp gradients recompute bit-exactly from local quantities alone") {
  // Locality: everything the update needs is (b_l, tp, the layer's own trace,
  // presynaptic rates).  Recompute from copies and compare bit for bit.
  LifParams p;
  Network net = Network::build("FC8-FC5-FC3", {1, 1, 6}, p, 1.5, 43);
  Feedback fb = init_feedback(net, 9, FeedbackNorm::absolute, 1.0);
  const int T = 7;
  SpikeTrain in(T, 6);
  Rng rng(5, {91});
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < 6; ++j) in.set(t, j, rng.below(2));
  Trace tr;
  tr.init(net, T);
  SpikeTrain out = network_forward(net, in, &tr);
  SpikeTrain label = label_encode(1, 3, T);
  auto tp = compute_tp(TpMode::brp, label, out);

  for (size_t li = 0; li < 2; ++li) {
    const LayerSpec& spec = net.layers[net.learnable[li]];
    auto target = project_target(fb.b[net.learnable[li]], spec.out_size(), 3, tp);
    auto e = residual(tr.layers[li], target, T);
    std::vector<double> grad(net.weight_count(net.learnable[li]), 0.0);
    local_grad_fc(spec, tr.layers[li], e, T, grad);

    // Recompute from copied local state.
    std::vector<float> b_copy(fb.b[net.learnable[li]]);
    LayerTrace trace_copy = tr.layers[li];
    std::vector<double> tp_copy(tp);
    auto target2 = project_target(b_copy, spec.out_size(), 3, tp_copy);
    auto e2 = residual(trace_copy, target2, T);
    std::vector<double> grad2(grad.size(), 0.0);
    local_grad_fc(spec, trace_copy, e2, T, grad2);
    CHECK(std::memcmp(grad.data(), grad2.data(), grad.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("brp hidden updates ignore a corrupted output train") {
  LifParams p;
  Network net = Network::build("FC8-FC3", {1, 1, 6}, p, 1.0, 47);
  const int T = 5;
  SpikeTrain label = label_encode(2, 3, T);
  SpikeTrain out_ok(T, 3);
  SpikeTrain out_bad = train_with_rate(T, {5, 5, 5});
  auto tp_ok = compute_tp(TpMode::brp, label, out_ok);
  auto tp_bad = compute_tp(TpMode::brp, label, out_bad);
  CHECK(tp_ok == tp_bad);
}

TEST_CASE("argmax decision is invariant to positive rescaling of rates") {
  // Doubling the window doubles counts but not the argmax of the rates.
  SpikeTrain a = train_with_rate(10, {3, 7, 1});
  SpikeTrain b = train_with_rate(20, {6, 14, 2});
  auto ra = firerate(a), rb = firerate(b);
  const auto ia = std::max_element(ra.begin(), ra.end()) - ra.begin();
  const auto ib = std::max_element(rb.begin(), rb.end()) - rb.begin();
  CHECK(ia == ib);
}
