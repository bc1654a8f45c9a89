#include "brpsnn/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace brpsnn {

namespace {

constexpr char kMagic[8] = {'B', 'R', 'P', 'S', 'N', 'N', '0', '1'};

// Little-endian serialization into a growing buffer; the whole checkpoint is
// assembled in memory so the CRC covers exactly what is written.
struct Writer {
  std::vector<unsigned char> buf;

  void bytes(const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf.insert(buf.end(), b, b + n);
  }
  void u32(uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (unsigned char)(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)(v >> (8 * i));
    bytes(b, 8);
  }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
};

struct Reader {
  const unsigned char* p;
  const unsigned char* end;
  std::string path;

  void need(size_t n) const {
    if ((size_t)(end - p) < n) throw CheckpointError(path + ": truncated checkpoint");
  }
  void bytes(void* out, size_t n) {
    need(n);
    std::memcpy(out, p, n);
    p += n;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= (uint32_t)p[i] << (8 * i);
    p += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= (uint64_t)p[i] << (8 * i);
    p += 8;
    return v;
  }
  float f32() {
    const uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    const uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

std::vector<uint32_t> tensor_dims(const Network& net, int idx) {
  const LayerSpec& l = net.layers[idx];
  if (l.kind == LayerKind::conv)
    return {(uint32_t)l.channels, (uint32_t)l.in_shape[0], (uint32_t)l.kh, (uint32_t)l.kw};
  return {(uint32_t)l.in_size(), (uint32_t)l.units};
}

}  // namespace

void save_checkpoint(const TrainState& st, const std::string& path) {
  const Network& net = st.net;
  if (st.fb.b.size() != net.learnable.size() || st.opt.size() != net.learnable.size())
    throw ContractError("save_checkpoint: state sections do not match network");

  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32((uint32_t)net.topology.size());
  w.bytes(net.topology.data(), net.topology.size());
  for (int d : net.input_shape) w.u32((uint32_t)d);
  w.u32((uint32_t)net.learnable.size());

  for (int idx : net.learnable) {
    const auto dims = tensor_dims(net, idx);
    w.u32((uint32_t)dims.size());
    for (uint32_t d : dims) w.u32(d);
    for (float x : net.weights[idx]) w.f32(x);
  }
  for (size_t li = 0; li < net.learnable.size(); ++li) {
    const auto& b = st.fb.b[li];
    if (b.empty()) {
      w.u32(0);
      continue;
    }
    const LayerSpec& l = net.layers[net.learnable[li]];
    w.u32(2);
    w.u32((uint32_t)l.out_size());
    w.u32((uint32_t)net.num_classes());
    for (float x : b) w.f32(x);
  }
  for (size_t li = 0; li < net.learnable.size(); ++li) {
    const AdamState& a = st.opt[li];
    const size_t n = net.weight_count(net.learnable[li]);
    if (a.m.size() != n || a.v.size() != n)
      throw ContractError("save_checkpoint: optimizer state size mismatch");
    w.u64((uint64_t)a.t);
    for (double x : a.m) w.f64(x);
    for (double x : a.v) w.f64(x);
  }

  const uint32_t crc = (uint32_t)crc32(0L, w.buf.data(), (uInt)w.buf.size());
  w.u32(crc);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(path + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(w.buf.data()), (std::streamsize)w.buf.size());
  if (!out) throw CheckpointError(path + ": write failure");
}

TrainState load_checkpoint(const std::string& path, const LifParams& lif) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path + ": cannot open");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < sizeof kMagic + 4) throw CheckpointError(path + ": file too short");

  const uint32_t stored_crc = (uint32_t)buf[buf.size() - 4] << 0 |
                              (uint32_t)buf[buf.size() - 3] << 8 |
                              (uint32_t)buf[buf.size() - 2] << 16 |
                              (uint32_t)buf[buf.size() - 1] << 24;
  const uint32_t crc = (uint32_t)crc32(0L, buf.data(), (uInt)(buf.size() - 4));
  if (crc != stored_crc) throw CheckpointError(path + ": CRC mismatch (corrupt file)");

  Reader r{buf.data(), buf.data() + buf.size() - 4, path};
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError(path + ": bad magic (not a checkpoint)");

  const uint32_t topo_len = r.u32();
  if (topo_len > 4096) throw CheckpointError(path + ": implausible topology length");
  std::string topology(topo_len, '\0');
  r.bytes(topology.data(), topo_len);
  std::array<int, 3> input_shape;
  for (int& d : input_shape) {
    const uint32_t v = r.u32();
    if (v == 0 || v > (1u << 20)) throw CheckpointError(path + ": implausible input shape");
    d = (int)v;
  }

  TrainState st;
  try {
    st.net = Network::build(topology, input_shape, lif, 1.0, 0);
  } catch (const ConfigError& e) {
    throw CheckpointError(path + ": stored topology invalid: " + e.what());
  }
  Network& net = st.net;

  const uint32_t k = r.u32();
  if (k != net.learnable.size())
    throw CheckpointError(path + ": learnable layer count mismatch");

  for (int idx : net.learnable) {
    const auto want = tensor_dims(net, idx);
    const uint32_t nd = r.u32();
    if (nd != want.size()) throw CheckpointError(path + ": weight rank mismatch");
    for (uint32_t d : want)
      if (r.u32() != d) throw CheckpointError(path + ": weight shape mismatch");
    auto& wv = net.weights[idx];
    for (auto& x : wv) x = r.f32();
  }

  st.fb.b.resize(net.learnable.size());
  for (size_t li = 0; li < net.learnable.size(); ++li) {
    const uint32_t nd = r.u32();
    if (nd == 0) {
      if (li + 1 != net.learnable.size())
        throw CheckpointError(path + ": feedback missing for hidden layer");
      continue;
    }
    if (nd != 2) throw CheckpointError(path + ": feedback rank mismatch");
    const LayerSpec& l = net.layers[net.learnable[li]];
    if (r.u32() != (uint32_t)l.out_size() || r.u32() != (uint32_t)net.num_classes())
      throw CheckpointError(path + ": feedback shape mismatch");
    auto& b = st.fb.b[li];
    b.resize((size_t)l.out_size() * net.num_classes());
    for (auto& x : b) x = r.f32();
  }

  st.opt.resize(net.learnable.size());
  for (size_t li = 0; li < net.learnable.size(); ++li) {
    const size_t n = net.weight_count(net.learnable[li]);
    AdamState& a = st.opt[li];
    a.t = (int64_t)r.u64();
    a.m.resize(n);
    a.v.resize(n);
    for (auto& x : a.m) x = r.f64();
    for (auto& x : a.v) x = r.f64();
  }
  if (r.p != r.end) throw CheckpointError(path + ": trailing bytes");
  return st;
}

}  // namespace brpsnn
