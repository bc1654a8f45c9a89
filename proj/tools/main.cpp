#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "brpsnn/trainer.hpp"

namespace fs = std::filesystem;
using namespace brpsnn;

namespace {

struct Overrides {
  int epochs = -1;
  int threads = -1;
  long long seed = -1;
  std::string mode, out_dir;
};

void apply_overrides(RunConfig& cfg, const Overrides& ov) {
  if (ov.epochs >= 0) cfg.epochs = ov.epochs;
  if (ov.threads >= 1) cfg.threads = ov.threads;
  if (ov.seed >= 0) cfg.seed = (uint64_t)ov.seed;
  if (!ov.mode.empty()) cfg.mode = parse_tp_mode(ov.mode);
  if (!ov.out_dir.empty()) cfg.out_dir = ov.out_dir;
}

int cmd_train(const std::string& config_path, const Overrides& ov) {
  RunConfig cfg = parse_config(config_path);
  apply_overrides(cfg, ov);
  cfg.validate();
  const DataPair data = load_datasets(cfg);
  fs::create_directories(cfg.out_dir);

  const TrainOutcome out = run_training(cfg, data, &std::cout);
  emit_csv(out.rows, cfg.out_dir + "/metrics.csv");
  save_checkpoint(out.state, cfg.out_dir + "/model.ckpt");

  double final_test = 0.0;
  for (const auto& r : out.rows)
    if (r.split == "test") final_test = r.accuracy;
  std::cout << "done: final test accuracy " << final_test << "\n"
            << "wrote " << cfg.out_dir << "/metrics.csv and " << cfg.out_dir
            << "/model.ckpt\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_path,
             const std::string& split, bool sweep, const Overrides& ov) {
  RunConfig cfg = parse_config(config_path);
  apply_overrides(cfg, ov);
  cfg.validate();
  const DataPair data = load_datasets(cfg);
  const Dataset& ds = split == "train" ? data.train : data.test;

  TrainState st = load_checkpoint(ckpt_path, cfg.lif);
  if (st.net.num_classes() != ds.num_classes)
    throw CheckpointError("checkpoint classes do not match dataset");

  const EvalResult ev = evaluate(st.net, ds, cfg);
  std::cout << "accuracy " << ev.accuracy << " loss " << ev.loss << " silent_conv "
            << ev.silent_conv << " silent_fc " << ev.silent_fc << "\n";

  if (sweep) {
    const std::vector<double> props = {0.0, 0.1, 0.2, 0.3, 0.4};
    const int t = ds.modality == Modality::event ? ds.t_bins : cfg.encoder.t_window;
    const auto rows = silent_sweep(st.net, props, 200, t, cfg.seed);
    std::cout << "proportion";
    for (size_t li = 0; li < st.net.learnable.size(); ++li) std::cout << ",layer" << li;
    std::cout << "\n";
    for (size_t pi = 0; pi < props.size(); ++pi) {
      std::cout << props[pi];
      for (double f : rows[pi]) std::cout << "," << f;
      std::cout << "\n";
    }
  }
  return 0;
}

int cmd_bench(int width, const std::vector<int>& depths, const std::vector<std::string>& modes,
              int batch, long long seed, const std::string& out_path) {
  std::string csv = "mode,width,depth,fwd_ops,upd_ops\n";
  for (const auto& mode_name : modes) {
    const TpMode mode = parse_tp_mode(mode_name);
    for (int depth : depths) {
      const OpCount c = bench_counters(mode, width, depth, batch, (uint64_t)seed);
      csv += mode_name + "," + std::to_string(width) + "," + std::to_string(depth) + "," +
             std::to_string(c.forward_ops) + "," + std::to_string(c.update_ops) + "\n";
    }
  }
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError(out_path + ": cannot open for writing");
    out << csv;
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_gen_synth(const std::string& kind, int n, long long seed, const std::string& prefix) {
  if (kind == "digits") {
    const Dataset ds = synth_digits(n, (uint64_t)seed);
    write_idx(ds, prefix + "-images.idx", prefix + "-labels.idx");
    std::cout << "wrote " << prefix << "-images.idx and " << prefix << "-labels.idx ("
              << ds.size() << " samples)\n";
  } else if (kind == "order2" || kind == "ramp") {
    const Dataset ds = synth_temporal(kind, n, (uint64_t)seed);
    write_event_stream(ds, prefix + ".events");
    std::cout << "wrote " << prefix << ".events (" << ds.size() << " samples)\n";
  } else {
    throw ConfigError("gen-synth: unknown kind '" + kind + "' (digits|order2|ramp)");
  }
  return 0;
}

int cmd_encode_preview(const std::string& config_path, int index, const std::string& split,
                       const std::string& format, const std::string& out_path) {
  RunConfig cfg = parse_config(config_path);
  cfg.validate();
  const DataPair data = load_datasets(cfg);
  const Dataset& ds = split == "train" ? data.train : data.test;
  if (index < 0 || (size_t)index >= ds.size())
    throw ConfigError("encode-preview: index out of range");

  const SpikeTrain train = encode_sample(ds, (size_t)index, cfg, /*eval_stream=*/true, 0);
  std::string text;
  for (int t = 0; t < train.t_window; ++t) {
    for (int i = 0; i < train.features; ++i) {
      if (format == "csv") {
        if (i) text += ',';
        text += train.at(t, i) ? '1' : '0';
      } else {
        text += train.at(t, i) ? '#' : '.';
      }
    }
    text += '\n';
  }
  if (out_path.empty()) {
    std::cout << "label " << ds.labels[index] << ", " << train.t_window << " steps x "
              << train.features << " units\n"
              << text;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError(out_path + ": cannot open for writing");
    out << text;
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking-network training engine with projected-feedback and chained credit assignment"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config_path, ckpt_path, split = "test", format = "ascii";
  std::string kind, prefix, out_path;
  bool sweep = false;
  int width = 64, batch = 50, n_samples = 1000, index = 0;
  long long seed = 1;
  std::vector<int> depths = {2, 4, 8};
  std::vector<std::string> modes = {"brp", "pseudo_bp"};

  CLI::App* train = app.add_subcommand("train", "train a network per config");
  train->add_option("--config", config_path, "run config file")->required();
  train->add_option("--epochs", ov.epochs, "override run.epochs");
  train->add_option("--seed", ov.seed, "override run.seed");
  train->add_option("--mode", ov.mode, "override run.mode (brp|err|sign|pseudo_bp)");
  train->add_option("--threads", ov.threads, "override run.threads");
  train->add_option("--out", ov.out_dir, "override out.dir");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--config", config_path, "run config file")->required();
  eval->add_option("--checkpoint", ckpt_path, "checkpoint to load")->required();
  eval->add_option("--split", split, "test|train")->check(CLI::IsMember({"test", "train"}));
  eval->add_flag("--silent-sweep", sweep, "probe silent fractions over input-spike proportions");
  eval->add_option("--threads", ov.threads, "override run.threads");

  CLI::App* bench = app.add_subcommand("bench", "complexity counter sweep over fc stacks");
  bench->add_option("--width", width, "hidden layer width");
  bench->add_option("--depths", depths, "learnable-layer depths")->delimiter(',');
  bench->add_option("--modes", modes, "rules to benchmark")->delimiter(',');
  bench->add_option("--batch", batch, "batch size");
  bench->add_option("--seed", seed, "seed");
  bench->add_option("--out", out_path, "write CSV here (default stdout)");

  CLI::App* gen = app.add_subcommand("gen-synth", "generate a synthetic dataset");
  gen->add_option("--kind", kind, "digits|order2|ramp")->required();
  gen->add_option("--n", n_samples, "samples (digits: total; order2/ramp: per class)");
  gen->add_option("--seed", seed, "seed");
  gen->add_option("--out", prefix, "output path prefix")->required();

  CLI::App* prev = app.add_subcommand("encode-preview", "dump one sample's spike raster");
  prev->add_option("--config", config_path, "run config file")->required();
  prev->add_option("--index", index, "sample index");
  prev->add_option("--split", split, "test|train")->check(CLI::IsMember({"test", "train"}));
  prev->add_option("--format", format, "ascii|csv")->check(CLI::IsMember({"ascii", "csv"}));
  prev->add_option("--out", out_path, "write raster here (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad invocation is a configuration error
  }

  try {
    if (train->parsed()) return cmd_train(config_path, ov);
    if (eval->parsed()) return cmd_eval(config_path, ckpt_path, split, sweep, ov);
    if (bench->parsed()) return cmd_bench(width, depths, modes, batch, seed, out_path);
    if (gen->parsed()) return cmd_gen_synth(kind, n_samples, seed, prefix);
    if (prev->parsed()) return cmd_encode_preview(config_path, index, split, format, out_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
