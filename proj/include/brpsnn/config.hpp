#pragma once

#include <string>
#include <vector>

#include "brpsnn/data.hpp"
#include "brpsnn/encode.hpp"
#include "brpsnn/learn.hpp"

namespace brpsnn {

// Full run description, loadable from an INI-style file.  Defaults mirror
// the reference image-task setup; everything is overridable.
struct RunConfig {
  // [run]
  std::string topology;
  TpMode mode = TpMode::brp;
  TpApply tp_apply = TpApply::per_window;
  int epochs = 10;
  int batch = 50;
  uint64_t seed = 1;
  double eta_conv = 1e-4;
  double eta_fc = 1e-4;
  double init_gain = 2.0;
  int threads = 1;
  bool deterministic = true;
  bool shuffle = true;

  // [lif]
  LifParams lif;

  // [encode]
  EncoderConfig encoder;

  // [feedback]
  FeedbackNorm fb_norm = FeedbackNorm::absolute;
  double fb_gain = 1.0;

  // [data]
  std::string data_kind;  // idx|cifar10|events|synth_digits|synth_order2|synth_ramp
  std::string train_images, train_labels, test_images, test_labels;
  std::vector<std::string> cifar_train;
  std::string cifar_test;
  std::string events_train, events_test;
  int synth_train = 1000, synth_test = 200;
  uint64_t data_seed = 7;
  size_t train_limit = 0, test_limit = 0;  // 0 = use all

  // [out]
  std::string out_dir = ".";
  int eval_every = 1;

  void validate(bool needs_data = true) const;
};

RunConfig parse_config_text(const std::string& text, const std::string& origin = "<text>");
RunConfig parse_config(const std::string& path);

// Loads the train/test pair described by the config.
struct DataPair {
  Dataset train, test;
};
DataPair load_datasets(const RunConfig& cfg);

}  // namespace brpsnn
