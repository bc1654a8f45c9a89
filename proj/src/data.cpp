#include "brpsnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace brpsnn {

void Dataset::validate() const {
  const size_t n = labels.size();
  for (int32_t l : labels)
    if (l < 0 || l >= num_classes) throw DataError("dataset: label out of range");
  if (modality == Modality::analog) {
    if (analog.size() != n * (size_t)sample_features())
      throw DataError("dataset: analog buffer size mismatch");
    for (float x : analog)
      if (!(x >= 0.0f && x <= 1.0f)) throw DataError("dataset: analog value outside [0,1]");
  } else {
    if (events.size() != n) throw DataError("dataset: event sample count mismatch");
    for (const auto& s : events) {
      if (s.features != sample_features() || s.t_window != t_bins)
        throw DataError("dataset: event sample shape mismatch");
      for (uint8_t v : s.data)
        if (v > 1) throw DataError("dataset: event sample not binary");
    }
  }
}

void Dataset::truncate(size_t n) {
  if (n >= size()) return;
  labels.resize(n);
  if (modality == Modality::analog)
    analog.resize(n * (size_t)sample_features());
  else
    events.resize(n);
}

namespace {

uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw DataError(path + ": truncated header");
  return ((uint32_t)b[0] << 24) | ((uint32_t)b[1] << 16) | ((uint32_t)b[2] << 8) | b[3];
}

void write_u32_be(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v >> 24), (unsigned char)(v >> 16),
                        (unsigned char)(v >> 8), (unsigned char)v};
  out.write(reinterpret_cast<char*>(b), 4);
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  return in;
}

}  // namespace

Dataset read_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs = open_binary(images_path);
  const uint32_t img_magic = read_u32_be(imgs, images_path);
  if (img_magic != 0x00000803)
    throw DataError(images_path + ": bad IDX magic (expected 0x00000803 u8/3-dim image file)");
  const uint32_t n = read_u32_be(imgs, images_path);
  const uint32_t rows = read_u32_be(imgs, images_path);
  const uint32_t cols = read_u32_be(imgs, images_path);
  if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096)
    throw DataError(images_path + ": implausible image dimensions");

  std::vector<unsigned char> pixels((size_t)n * rows * cols);
  if (!imgs.read(reinterpret_cast<char*>(pixels.data()), (std::streamsize)pixels.size()))
    throw DataError(images_path + ": truncated image data");

  std::ifstream labs = open_binary(labels_path);
  const uint32_t lab_magic = read_u32_be(labs, labels_path);
  if (lab_magic != 0x00000801)
    throw DataError(labels_path + ": bad IDX magic (expected 0x00000801 u8 label file)");
  const uint32_t n_labels = read_u32_be(labs, labels_path);
  if (n_labels != n)
    throw DataError("IDX count mismatch: " + std::to_string(n) + " images vs " +
                    std::to_string(n_labels) + " labels");
  std::vector<unsigned char> raw_labels(n_labels);
  if (!labs.read(reinterpret_cast<char*>(raw_labels.data()), (std::streamsize)n_labels))
    throw DataError(labels_path + ": truncated label data");

  Dataset ds;
  ds.modality = Modality::analog;
  ds.shape = {1, (int)rows, (int)cols};
  ds.analog.resize(pixels.size());
  for (size_t i = 0; i < pixels.size(); ++i) ds.analog[i] = pixels[i] / 255.0f;
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  int max_label = 0;
  for (int32_t l : ds.labels) max_label = std::max(max_label, (int)l);
  ds.num_classes = std::max(10, max_label + 1);
  ds.validate();
  return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path) {
  if (ds.modality != Modality::analog || ds.shape[0] != 1)
    throw ContractError("write_idx: only single-channel analog datasets");
  std::ofstream imgs(images_path, std::ios::binary);
  if (!imgs) throw DataError(images_path + ": cannot open for writing");
  write_u32_be(imgs, 0x00000803);
  write_u32_be(imgs, (uint32_t)ds.size());
  write_u32_be(imgs, (uint32_t)ds.shape[1]);
  write_u32_be(imgs, (uint32_t)ds.shape[2]);
  std::vector<unsigned char> row(ds.sample_features());
  for (size_t i = 0; i < ds.size(); ++i) {
    auto s = ds.sample(i);
    for (size_t k = 0; k < row.size(); ++k)
      row[k] = (unsigned char)std::lround(s[k] * 255.0f);
    imgs.write(reinterpret_cast<char*>(row.data()), (std::streamsize)row.size());
  }
  std::ofstream labs(labels_path, std::ios::binary);
  if (!labs) throw DataError(labels_path + ": cannot open for writing");
  write_u32_be(labs, 0x00000801);
  write_u32_be(labs, (uint32_t)ds.size());
  for (int32_t l : ds.labels) {
    const unsigned char b = (unsigned char)l;
    labs.write(reinterpret_cast<const char*>(&b), 1);
  }
}

Dataset read_cifar10_bin(const std::vector<std::string>& paths) {
  constexpr size_t kRecord = 3073;
  Dataset ds;
  ds.modality = Modality::analog;
  ds.shape = {3, 32, 32};
  ds.num_classes = 10;
  for (const auto& path : paths) {
    std::ifstream in = open_binary(path);
    in.seekg(0, std::ios::end);
    const auto len = (size_t)in.tellg();
    in.seekg(0);
    if (len == 0 || len % kRecord != 0)
      throw DataError(path + ": length " + std::to_string(len) +
                      " is not a multiple of 3073-byte records");
    std::vector<unsigned char> buf(len);
    if (!in.read(reinterpret_cast<char*>(buf.data()), (std::streamsize)len))
      throw DataError(path + ": read failure");
    const size_t n = len / kRecord;
    for (size_t r = 0; r < n; ++r) {
      const unsigned char* rec = buf.data() + r * kRecord;
      if (rec[0] > 9) throw DataError(path + ": label byte out of range");
      ds.labels.push_back(rec[0]);
      for (size_t k = 1; k < kRecord; ++k) ds.analog.push_back(rec[k] / 255.0f);
    }
  }
  ds.validate();
  return ds;
}

namespace {

long parse_long(std::string_view s, const std::string& ctx) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw DataError(ctx + ": expected integer, got '" + std::string(s) + "'");
  return v;
}

long header_field(const std::string& line, const std::string& key, const std::string& path) {
  const std::string pat = key + "=";
  const auto pos = line.find(pat);
  if (pos == std::string::npos)
    throw DataError(path + ": header missing '" + key + "='");
  auto end = line.find(' ', pos);
  if (end == std::string::npos) end = line.size();
  return parse_long(std::string_view(line).substr(pos + pat.size(), end - pos - pat.size()),
                    path + " header");
}

struct RawEvent {
  long t, x, y, p;
};

void flush_sample(Dataset& ds, std::vector<RawEvent>& evs, int label,
                  const std::string& path) {
  SpikeTrain train(ds.t_bins, ds.sample_features());
  if (!evs.empty()) {
    // Equal-width bins over the sample's span, never stretching short
    // samples: timestamps already inside [0, t_bins) map to themselves, so
    // emitted bin indices re-read exactly.
    const long duration = std::max(evs.back().t + 1, (long)ds.t_bins);
    for (const RawEvent& e : evs) {
      const long bin = e.t * (long)ds.t_bins / duration;
      train.set((int)bin, (int)(e.y * ds.shape[2] + e.x), 1);
    }
  }
  (void)path;
  ds.events.push_back(std::move(train));
  ds.labels.push_back(label);
  evs.clear();
}

}  // namespace

Dataset read_event_stream(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": missing header line");

  Dataset ds;
  ds.modality = Modality::event;
  ds.num_classes = (int)header_field(line, "classes", path);
  const int w = (int)header_field(line, "width", path);
  const int h = (int)header_field(line, "height", path);
  ds.t_bins = (int)header_field(line, "t_bins", path);
  if (ds.num_classes < 2 || w < 1 || h < 1 || ds.t_bins < 1)
    throw DataError(path + ": invalid header values");
  ds.shape = {1, h, w};

  std::vector<RawEvent> evs;
  int label = -1;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    if (line.rfind("label:", 0) == 0) {
      if (label >= 0) flush_sample(ds, evs, label, path);
      label = (int)parse_long(std::string_view(line).substr(6), where);
      if (label < 0 || label >= ds.num_classes)
        throw DataError(where + ": label out of range");
      continue;
    }
    if (label < 0) throw DataError(where + ": event line before first label");
    std::istringstream ls(line);
    RawEvent e{};
    std::string tt, tx, ty, tp;
    if (!(ls >> tt >> tx >> ty >> tp)) throw DataError(where + ": expected 't x y p'");
    std::string extra;
    if (ls >> extra) throw DataError(where + ": trailing fields");
    e.t = parse_long(tt, where);
    e.x = parse_long(tx, where);
    e.y = parse_long(ty, where);
    e.p = parse_long(tp, where);
    if (e.t < 0) throw DataError(where + ": negative timestamp");
    if (!evs.empty() && e.t < evs.back().t)
      throw DataError(where + ": timestamps must be non-decreasing within a sample");
    if (e.x < 0 || e.x >= w || e.y < 0 || e.y >= h)
      throw DataError(where + ": coordinates outside " + std::to_string(w) + "x" +
                      std::to_string(h));
    if (e.p != 0 && e.p != 1) throw DataError(where + ": polarity must be 0 or 1");
    evs.push_back(e);
  }
  if (label >= 0) flush_sample(ds, evs, label, path);
  ds.validate();
  return ds;
}

void write_event_stream(const Dataset& ds, const std::string& path) {
  if (ds.modality != Modality::event)
    throw ContractError("write_event_stream: dataset is not event-modality");
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << "classes=" << ds.num_classes << " width=" << ds.shape[2] << " height="
      << ds.shape[1] << " t_bins=" << ds.t_bins << "\n";
  // Emitting bin indices as timestamps makes re-reading the exact inverse:
  // duration equals t_bins, so binning is the identity.
  for (size_t i = 0; i < ds.size(); ++i) {
    out << "label:" << ds.labels[i] << "\n";
    const SpikeTrain& s = ds.events[i];
    for (int t = 0; t < s.t_window; ++t)
      for (int y = 0; y < ds.shape[1]; ++y)
        for (int x = 0; x < ds.shape[2]; ++x)
          if (s.at(t, y * ds.shape[2] + x))
            out << t << " " << x << " " << y << " 1\n";
  }
  if (!out) throw DataError(path + ": write failure");
}

namespace {

// Deterministic standard normal via Box-Muller over the shared uniform
// source; avoids std::normal_distribution, whose algorithm is unspecified.
class NormalSource {
 public:
  explicit NormalSource(Rng& rng) : rng_(rng) {}
  double next() {
    if (have_) {
      have_ = false;
      return spare_;
    }
    const double u1 = 1.0 - rng_.uniform();  // (0,1]
    const double u2 = rng_.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

 private:
  Rng& rng_;
  double spare_ = 0.0;
  bool have_ = false;
};

// 7x7 coarse glyphs for digits 0..9; rows are strings of 0/1.
constexpr const char* kGlyphs[10][7] = {
    {"0111110", "1100011", "1100011", "1100011", "1100011", "1100011", "0111110"},
    {"0001100", "0011100", "0111100", "0001100", "0001100", "0001100", "0111111"},
    {"0111110", "1100011", "0000011", "0001110", "0111000", "1100000", "1111111"},
    {"0111110", "1100011", "0000011", "0011110", "0000011", "1100011", "0111110"},
    {"0000110", "0001110", "0011010", "0110010", "1111111", "0000010", "0000010"},
    {"1111111", "1100000", "1111110", "0000011", "0000011", "1100011", "0111110"},
    {"0011110", "0110000", "1100000", "1111110", "1100011", "1100011", "0111110"},
    {"1111111", "0000011", "0000110", "0001100", "0011000", "0110000", "0110000"},
    {"0111110", "1100011", "1100011", "0111110", "1100011", "1100011", "0111110"},
    {"0111110", "1100011", "1100011", "0111111", "0000011", "0000110", "0111100"},
};

}  // namespace

Dataset synth_digits(int n, uint64_t seed) {
  if (n < 1) throw ConfigError("synth_digits: n must be positive");
  Dataset ds;
  ds.modality = Modality::analog;
  ds.shape = {1, 28, 28};
  ds.num_classes = 10;
  ds.analog.assign((size_t)n * 784, 0.0f);
  ds.labels.resize(n);

  for (int i = 0; i < n; ++i) {
    Rng rng(seed, {stream::kSynthData, (uint64_t)i});
    NormalSource gauss(rng);
    const int d = (int)rng.below(10);
    const int dy = (int)rng.below(8);  // glyph is 21x21 after 3x upscale
    const int dx = (int)rng.below(8);
    const double contrast = rng.uniform(0.7, 1.0);
    ds.labels[i] = d;
    float* img = ds.analog.data() + (size_t)i * 784;
    for (int r = 0; r < 21; ++r)
      for (int c = 0; c < 21; ++c)
        if (kGlyphs[d][r / 3][c / 3] == '1')
          img[(dy + r) * 28 + dx + c] = (float)contrast;
    for (int k = 0; k < 784; ++k) {
      const double v = img[k] + 0.08 * gauss.next();
      img[k] = (float)std::clamp(v, 0.0, 1.0);
    }
  }
  return ds;
}

Dataset synth_temporal(const std::string& kind, int n, uint64_t seed) {
  if (n < 2) throw ConfigError("synth_temporal: need at least 2 samples per class");
  constexpr int kChannels = 12, kWindow = 20;
  Dataset ds;
  ds.modality = Modality::event;
  ds.shape = {1, 1, kChannels};
  ds.num_classes = 2;
  ds.t_bins = kWindow;

  if (kind == "order2") {
    // Both classes place two spikes per channel; only the gap differs
    // (adjacent steps versus nine apart), so per-channel rates match exactly.
    for (int cls = 0; cls < 2; ++cls) {
      const int gap = cls == 0 ? 1 : 9;
      for (int i = 0; i < n; ++i) {
        Rng rng(seed, {stream::kSynthData, (uint64_t)(cls * n + i)});
        SpikeTrain s(kWindow, kChannels);
        for (int c = 0; c < kChannels; ++c) {
          const int q = (int)rng.below(kWindow - 9);  // same support for both classes
          s.set(q, c, 1);
          s.set(q + gap, c, 1);
        }
        ds.events.push_back(std::move(s));
        ds.labels.push_back(cls);
      }
    }
  } else if (kind == "ramp") {
    // Rising versus falling intensity across channels, Bernoulli-encoded.
    for (int cls = 0; cls < 2; ++cls) {
      for (int i = 0; i < n; ++i) {
        Rng rng(seed, {stream::kSynthData, (uint64_t)(cls * n + i)});
        const double gain = rng.uniform(0.5, 1.0);
        SpikeTrain s(kWindow, kChannels);
        for (int t = 0; t < kWindow; ++t)
          for (int c = 0; c < kChannels; ++c) {
            const double level = (c + 0.5) / kChannels;
            const double p = gain * (cls == 0 ? level : 1.0 - level);
            if (rng.uniform() < p) s.set(t, c, 1);
          }
        ds.events.push_back(std::move(s));
        ds.labels.push_back(cls);
      }
    }
  } else {
    throw ConfigError("synth_temporal: unknown kind '" + kind + "'");
  }
  ds.validate();
  return ds;
}

std::vector<std::vector<int32_t>> make_batches(size_t n, int batch, bool shuffle,
                                               uint64_t seed, int epoch) {
  if (batch < 1) throw ContractError("make_batches: batch must be positive");
  std::vector<int32_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = (int32_t)i;
  if (shuffle) {
    Rng rng(seed, {stream::kShuffle, (uint64_t)epoch});
    for (size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::vector<std::vector<int32_t>> batches;
  for (size_t at = 0; at < n; at += batch) {
    const size_t end = std::min(n, at + batch);
    batches.emplace_back(order.begin() + at, order.begin() + end);
  }
  return batches;
}

}  // namespace brpsnn
