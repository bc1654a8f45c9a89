#include "doctest.h"

#include "brpsnn/config.hpp"
#include "brpsnn/errors.hpp"

using namespace brpsnn;

TEST_CASE("config text parsing: defaults plus overrides") {
  const std::string text =
      "# comment\n"
      "[run]\n"
      "topology = FC32-FC10\n"
      "mode = sign\n"
      "epochs = 3\n"
      "batch = 25\n"
      "seed = 42\n"
      "eta_fc = 0.001\n"
      "; another comment\n"
      "[lif]\n"
      "g = 0.3\n"
      "v_th = 0.6\n"
      "[encode]\n"
      "t_window = 12\n"
      "alpha = 0.5\n"
      "polarity = literal\n"
      "[feedback]\n"
      "norm = inv_sqrt\n"
      "gain = 0.75\n"
      "[data]\n"
      "kind = synth_digits\n"
      "synth_train = 64\n"
      "synth_test = 16\n"
      "[out]\n"
      "dir = /tmp/x\n"
      "eval_every = 2\n";
  RunConfig cfg = parse_config_text(text);
  CHECK(cfg.topology == "FC32-FC10");
  CHECK(cfg.mode == TpMode::sign);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.batch == 25);
  CHECK(cfg.seed == 42);
  CHECK(cfg.eta_fc == 0.001);
  CHECK(cfg.eta_conv == 1e-4);  // untouched default
  CHECK(cfg.lif.g == 0.3);
  CHECK(cfg.lif.v_th == 0.6);
  CHECK(cfg.encoder.t_window == 12);
  CHECK(cfg.encoder.alpha == 0.5);
  CHECK(cfg.encoder.polarity == Polarity::literal);
  CHECK(cfg.fb_norm == FeedbackNorm::inv_sqrt);
  CHECK(cfg.fb_gain == 0.75);
  CHECK(cfg.data_kind == "synth_digits");
  CHECK(cfg.synth_train == 64);
  CHECK(cfg.out_dir == "/tmp/x");
  CHECK(cfg.eval_every == 2);
  cfg.validate();
}

TEST_CASE("unknown keys and sections are rejected") {
  CHECK_THROWS_AS(parse_config_text("[run]\nfoo = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[nope]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[run]\nepochs\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[run]\nmode = magic\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("epochs = 1\n"), ConfigError);  // key before section
}

TEST_CASE("validation ranges") {
  RunConfig cfg;
  cfg.topology = "FC8-FC2";
  cfg.data_kind = "synth_digits";
  cfg.validate();

  RunConfig bad = cfg;
  bad.epochs = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.epochs = 0;  // a no-op training run is legal
  bad.validate();
  bad = cfg;
  bad.batch = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.eta_fc = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.topology = "FC8-S2";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.data_kind = "postgres";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.data_kind = "idx";  // requires file paths
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.encoder.alpha = -2.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("missing config file raises a config error with the path") {
  try {
    parse_config("/nonexistent/brp.ini");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/brp.ini") != std::string::npos);
  }
}

TEST_CASE("synthetic dataset loading honors counts and seeds") {
  RunConfig cfg;
  cfg.topology = "FC16-FC10";
  cfg.data_kind = "synth_digits";
  cfg.synth_train = 40;
  cfg.synth_test = 12;
  cfg.data_seed = 11;
  DataPair dp = load_datasets(cfg);
  CHECK(dp.train.size() == 40);
  CHECK(dp.test.size() == 12);
  // Train and test draw from different streams.
  CHECK(dp.train.analog != dp.test.analog);

  RunConfig cfg2 = cfg;
  DataPair dp2 = load_datasets(cfg2);
  CHECK(dp2.train.analog == dp.train.analog);  // same seed, same bytes

  cfg.data_kind = "synth_order2";
  DataPair ev = load_datasets(cfg);
  CHECK(ev.train.modality == Modality::event);
  CHECK(ev.train.size() == 80);  // per-class count doubles
}

TEST_CASE("train and test limits carve prefixes") {
  RunConfig cfg;
  cfg.topology = "FC8-FC10";
  cfg.data_kind = "synth_digits";
  cfg.synth_train = 30;
  cfg.synth_test = 30;
  cfg.train_limit = 12;
  cfg.test_limit = 5;
  DataPair dp = load_datasets(cfg);
  CHECK(dp.train.size() == 12);
  CHECK(dp.test.size() == 5);
}
