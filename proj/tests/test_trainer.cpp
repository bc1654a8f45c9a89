#include "doctest.h"

#include <cmath>
#include <cstring>

#include "brpsnn/metrics.hpp"
#include "brpsnn/trainer.hpp"

using namespace brpsnn;

namespace {

RunConfig small_cfg() {
  RunConfig cfg;
  cfg.topology = "Cov3*3x4-S2-FC16-FC10";
  cfg.epochs = 2;
  cfg.batch = 16;
  cfg.seed = 3;
  cfg.eta_conv = cfg.eta_fc = 1e-3;
  cfg.encoder.t_window = 10;
  cfg.data_kind = "synth_digits";
  cfg.synth_train = 48;
  cfg.synth_test = 16;
  cfg.data_seed = 5;
  return cfg;
}

bool weights_equal(const Network& a, const Network& b) {
  for (size_t i = 0; i < a.weights.size(); ++i) {
    if (a.weights[i].size() != b.weights[i].size()) return false;
    if (!a.weights[i].empty() &&
        std::memcmp(a.weights[i].data(), b.weights[i].data(),
                    a.weights[i].size() * sizeof(float)) != 0)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("training is reproducible and thread-count invariant") {
  RunConfig cfg = small_cfg();
  const DataPair data = load_datasets(cfg);
  TrainOutcome a = run_training(cfg, data);
  TrainOutcome b = run_training(cfg, data);
  CHECK(weights_equal(a.state.net, b.state.net));
  CHECK(csv_to_string(a.rows) == csv_to_string(b.rows));

  RunConfig threaded = cfg;
  threaded.threads = 3;
  TrainOutcome c = run_training(threaded, data);
  CHECK(weights_equal(a.state.net, c.state.net));
  CHECK(csv_to_string(a.rows) == csv_to_string(c.rows));
}

TEST_CASE("every learning rule completes a run with finite weights") {
  RunConfig cfg = small_cfg();
  cfg.epochs = 1;
  const DataPair data = load_datasets(cfg);
  auto run_mode = [&](TpMode mode, TpApply apply) {
    RunConfig c2 = cfg;
    c2.mode = mode;
    c2.tp_apply = apply;
    TrainOutcome out = run_training(c2, data);
    REQUIRE(out.rows.size() == 2);  // one train row + one test row
    CHECK(out.rows[0].split == "train");
    CHECK(out.rows[1].split == "test");
    CHECK(out.rows[0].upd_ops > 0);
    CHECK(out.rows[0].wall_ms == 0);  // deterministic mode pins wall time
    for (int idx : out.state.net.learnable)
      for (float w : out.state.net.weights[idx]) REQUIRE(std::isfinite(w));
  };
  run_mode(TpMode::brp, TpApply::per_window);
  run_mode(TpMode::brp, TpApply::per_step);
  run_mode(TpMode::err, TpApply::per_window);
  run_mode(TpMode::sign, TpApply::per_window);
  run_mode(TpMode::pseudo_bp, TpApply::per_window);
}

TEST_CASE("evaluation is deterministic across calls") {
  RunConfig cfg = small_cfg();
  const DataPair data = load_datasets(cfg);
  TrainState st = init_state(cfg, data.train);
  const EvalResult a = evaluate(st.net, data.test, cfg);
  const EvalResult b = evaluate(st.net, data.test, cfg);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.loss == b.loss);
  CHECK(a.silent_per_layer == b.silent_per_layer);
  CHECK(a.fwd_ops == b.fwd_ops);
}

TEST_CASE("stop callback ends the run at the first matching evaluation") {
  RunConfig cfg = small_cfg();
  cfg.epochs = 5;
  const DataPair data = load_datasets(cfg);
  int seen = 0;
  TrainOutcome out = run_training(cfg, data, nullptr, [&](int epoch, const EvalResult&) {
    ++seen;
    return epoch >= 1;
  });
  CHECK(seen == 1);
  REQUIRE(out.rows.size() == 2);
  CHECK(out.rows.back().epoch == 1);
}

TEST_CASE("zero epochs is a no-op that keeps the initial weights") {
  RunConfig cfg = small_cfg();
  cfg.epochs = 0;
  const DataPair data = load_datasets(cfg);
  TrainOutcome out = run_training(cfg, data);
  CHECK(out.rows.empty());
  TrainState fresh = init_state(cfg, data.train);
  CHECK(weights_equal(out.state.net, fresh.net));
}

TEST_CASE("silent sweep: zero drive silences everything, results reproduce") {
  RunConfig cfg = small_cfg();
  const DataPair data = load_datasets(cfg);
  TrainState st = init_state(cfg, data.train);
  const std::vector<double> props{0.0, 0.2, 0.4};
  auto a = silent_sweep(st.net, props, 8, 10, 21);
  REQUIRE(a.size() == props.size());
  for (const auto& per_layer : a) REQUIRE(per_layer.size() == st.net.learnable.size());
  for (double f : a[0]) CHECK(f == 1.0);  // no input spikes, no activity
  auto b = silent_sweep(st.net, props, 8, 10, 21);
  CHECK(a == b);
}

TEST_CASE("bench counters: projected rules affine in depth, chained rule superlinear") {
  auto upd = [&](TpMode m, int depth) {
    return bench_counters(m, 8, depth, 8, 1).update_ops;
  };
  const uint64_t o2 = upd(TpMode::brp, 2), o3 = upd(TpMode::brp, 3), o4 = upd(TpMode::brp, 4);
  CHECK(o3 - o2 == o4 - o3);  // exact affine growth
  const uint64_t q2 = upd(TpMode::pseudo_bp, 2), q3 = upd(TpMode::pseudo_bp, 3),
                 q4 = upd(TpMode::pseudo_bp, 4);
  CHECK(q4 - q3 > q3 - q2);
  CHECK((double)q3 / (double)o3 > (double)q2 / (double)o2);
  CHECK((double)q4 / (double)o4 > (double)q3 / (double)o3);
}
