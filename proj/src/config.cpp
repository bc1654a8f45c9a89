#include "brpsnn/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace brpsnn {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

long long to_int(const std::string& v, const std::string& key) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void apply(RunConfig& cfg, const std::string& section, const std::string& key,
           const std::string& value) {
  const std::string full = section + "." + key;
  if (section == "run") {
    if (key == "topology") cfg.topology = value;
    else if (key == "mode") cfg.mode = parse_tp_mode(value);
    else if (key == "tp_apply") {
      if (value == "per_window") cfg.tp_apply = TpApply::per_window;
      else if (value == "per_step") cfg.tp_apply = TpApply::per_step;
      else throw ConfigError("config: tp_apply must be per_window|per_step, got '" + value + "'");
    } else if (key == "epochs") cfg.epochs = (int)to_int(value, full);
    else if (key == "batch") cfg.batch = (int)to_int(value, full);
    else if (key == "seed") cfg.seed = (uint64_t)to_int(value, full);
    else if (key == "eta_conv") cfg.eta_conv = to_double(value, full);
    else if (key == "eta_fc") cfg.eta_fc = to_double(value, full);
    else if (key == "eta") cfg.eta_conv = cfg.eta_fc = to_double(value, full);
    else if (key == "init_gain") cfg.init_gain = to_double(value, full);
    else if (key == "threads") cfg.threads = (int)to_int(value, full);
    else if (key == "deterministic") cfg.deterministic = to_bool(value, full);
    else if (key == "shuffle") cfg.shuffle = to_bool(value, full);
    else throw ConfigError("config: unknown key '" + full + "'");
  } else if (section == "lif") {
    if (key == "g") cfg.lif.g = to_double(value, full);
    else if (key == "v_th") cfg.lif.v_th = to_double(value, full);
    else if (key == "v_reset") cfg.lif.v_reset = to_double(value, full);
    else if (key == "v_rest") cfg.lif.v_rest = to_double(value, full);
    else if (key == "tau_ref") cfg.lif.tau_ref = (int)to_int(value, full);
    else if (key == "surrogate_width") cfg.lif.surrogate_width = to_double(value, full);
    else throw ConfigError("config: unknown key '" + full + "'");
  } else if (section == "encode") {
    if (key == "t_window") cfg.encoder.t_window = (int)to_int(value, full);
    else if (key == "alpha") cfg.encoder.alpha = to_double(value, full);
    else if (key == "polarity") {
      if (value == "intensity") cfg.encoder.polarity = Polarity::intensity;
      else if (value == "literal") cfg.encoder.polarity = Polarity::literal;
      else throw ConfigError("config: polarity must be intensity|literal, got '" + value + "'");
    } else throw ConfigError("config: unknown key '" + full + "'");
  } else if (section == "feedback") {
    if (key == "norm") {
      if (value == "absolute") cfg.fb_norm = FeedbackNorm::absolute;
      else if (value == "inv_sqrt") cfg.fb_norm = FeedbackNorm::inv_sqrt;
      else throw ConfigError("config: feedback norm must be absolute|inv_sqrt, got '" + value + "'");
    } else if (key == "gain") cfg.fb_gain = to_double(value, full);
    else throw ConfigError("config: unknown key '" + full + "'");
  } else if (section == "data") {
    if (key == "kind") cfg.data_kind = value;
    else if (key == "train_images") cfg.train_images = value;
    else if (key == "train_labels") cfg.train_labels = value;
    else if (key == "test_images") cfg.test_images = value;
    else if (key == "test_labels") cfg.test_labels = value;
    else if (key == "cifar_train") cfg.cifar_train = split_list(value);
    else if (key == "cifar_test") cfg.cifar_test = value;
    else if (key == "events_train") cfg.events_train = value;
    else if (key == "events_test") cfg.events_test = value;
    else if (key == "synth_train") cfg.synth_train = (int)to_int(value, full);
    else if (key == "synth_test") cfg.synth_test = (int)to_int(value, full);
    else if (key == "seed") cfg.data_seed = (uint64_t)to_int(value, full);
    else if (key == "train_limit") cfg.train_limit = (size_t)to_int(value, full);
    else if (key == "test_limit") cfg.test_limit = (size_t)to_int(value, full);
    else throw ConfigError("config: unknown key '" + full + "'");
  } else if (section == "out") {
    if (key == "dir") cfg.out_dir = value;
    else if (key == "eval_every") cfg.eval_every = (int)to_int(value, full);
    else throw ConfigError("config: unknown key '" + full + "'");
  } else {
    throw ConfigError("config: unknown section '[" + section + "]'");
  }
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError("config: missing " + what + " path");
  if (!std::filesystem::exists(path))
    throw ConfigError("config: " + what + " file not found: " + path);
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (section.empty()) throw ConfigError(where + ": key before any [section]");
    apply(cfg, section, key, value);
  }
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

void RunConfig::validate(bool needs_data) const {
  if (topology.empty()) throw ConfigError("config: run.topology is required");
  parse_topology(topology);  // surfaces grammar errors at validation time
  if (epochs < 0) throw ConfigError("config: run.epochs must be >= 0");
  if (batch < 1) throw ConfigError("config: run.batch must be >= 1");
  if (!(eta_conv > 0.0) || !(eta_fc > 0.0))
    throw ConfigError("config: learning rates must be positive");
  if (!(init_gain > 0.0)) throw ConfigError("config: run.init_gain must be positive");
  if (threads < 1) throw ConfigError("config: run.threads must be >= 1");
  if (eval_every < 1) throw ConfigError("config: out.eval_every must be >= 1");
  if (!(fb_gain > 0.0)) throw ConfigError("config: feedback.gain must be positive");
  lif.validate();
  encoder.validate();

  if (!needs_data) return;
  if (data_kind == "idx") {
    require_file(train_images, "data.train_images");
    require_file(train_labels, "data.train_labels");
    require_file(test_images, "data.test_images");
    require_file(test_labels, "data.test_labels");
  } else if (data_kind == "cifar10") {
    if (cifar_train.empty()) throw ConfigError("config: data.cifar_train is required");
    for (const auto& p : cifar_train) require_file(p, "data.cifar_train");
    require_file(cifar_test, "data.cifar_test");
  } else if (data_kind == "events") {
    require_file(events_train, "data.events_train");
    require_file(events_test, "data.events_test");
  } else if (data_kind == "synth_digits" || data_kind == "synth_order2" ||
             data_kind == "synth_ramp") {
    if (synth_train < 1 || synth_test < 1)
      throw ConfigError("config: synth sample counts must be positive");
  } else if (data_kind.empty()) {
    throw ConfigError("config: data.kind is required");
  } else {
    throw ConfigError("config: unknown data.kind '" + data_kind + "'");
  }
}

DataPair load_datasets(const RunConfig& cfg) {
  DataPair out;
  if (cfg.data_kind == "idx") {
    out.train = read_idx(cfg.train_images, cfg.train_labels);
    out.test = read_idx(cfg.test_images, cfg.test_labels);
  } else if (cfg.data_kind == "cifar10") {
    out.train = read_cifar10_bin(cfg.cifar_train);
    out.test = read_cifar10_bin({cfg.cifar_test});
  } else if (cfg.data_kind == "events") {
    out.train = read_event_stream(cfg.events_train);
    out.test = read_event_stream(cfg.events_test);
  } else if (cfg.data_kind == "synth_digits") {
    out.train = synth_digits(cfg.synth_train, cfg.data_seed);
    out.test = synth_digits(cfg.synth_test, cfg.data_seed + 1);
  } else if (cfg.data_kind == "synth_order2" || cfg.data_kind == "synth_ramp") {
    const std::string kind = cfg.data_kind.substr(6);
    out.train = synth_temporal(kind, cfg.synth_train, cfg.data_seed);
    out.test = synth_temporal(kind, cfg.synth_test, cfg.data_seed + 1);
  } else {
    throw ConfigError("config: unknown data.kind '" + cfg.data_kind + "'");
  }
  if (cfg.train_limit) out.train.truncate(cfg.train_limit);
  if (cfg.test_limit) out.test.truncate(cfg.test_limit);
  return out;
}

}  // namespace brpsnn
