#include "brpsnn/topology.hpp"

#include <charconv>
#include <sstream>

namespace brpsnn {

namespace {

// Strict positive-integer parse of a full token slice.
int parse_int(std::string_view s, const std::string& where) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v < 1)
    throw ConfigError("topology: expected positive integer in " + where);
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

LayerSpec parse_conv(const std::string& tok) {
  // Cov<kh>*<kw>x<ch> with optional (annot,annot) suffix.
  std::string body = tok.substr(3);
  const auto paren = body.find('(');
  if (paren != std::string::npos) {
    if (body.back() != ')') throw ConfigError("topology: unterminated annotation in '" + tok + "'");
    const std::string annots = body.substr(paren + 1, body.size() - paren - 2);
    for (const auto& a : split(annots, ',')) {
      if (a != "valid" && a != "stride1")
        throw ConfigError("topology: unknown conv annotation '" + a + "'");
    }
    body = body.substr(0, paren);
  }
  const auto star = body.find('*');
  const auto x = body.find('x');
  if (star == std::string::npos || x == std::string::npos || x < star)
    throw ConfigError("topology: malformed conv token '" + tok + "'");
  LayerSpec l;
  l.kind = LayerKind::conv;
  l.kh = parse_int(std::string_view(body).substr(0, star), tok);
  l.kw = parse_int(std::string_view(body).substr(star + 1, x - star - 1), tok);
  l.channels = parse_int(std::string_view(body).substr(x + 1), tok);
  return l;
}

}  // namespace

std::vector<LayerSpec> parse_topology(const std::string& text) {
  if (text.empty()) throw ConfigError("topology: empty string");
  std::vector<LayerSpec> layers;
  for (const auto& tok : split(text, '-')) {
    if (tok.empty()) throw ConfigError("topology: empty token (doubled '-'?)");
    LayerSpec l;
    if (tok.rfind("Cov", 0) == 0) {
      l = parse_conv(tok);
    } else if (tok.rfind("FC", 0) == 0) {
      l.kind = LayerKind::fc;
      l.units = parse_int(std::string_view(tok).substr(2), tok);
    } else if (tok[0] == 'S') {
      l.kind = LayerKind::pool;
      l.pool_k = parse_int(std::string_view(tok).substr(1), tok);
    } else {
      throw ConfigError("topology: unknown token '" + tok + "'");
    }
    layers.push_back(l);
  }

  if (layers.back().kind != LayerKind::fc)
    throw ConfigError("topology: last layer must be FC");
  bool seen_fc = false;
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.kind == LayerKind::fc) seen_fc = true;
    if (l.kind == LayerKind::conv && seen_fc)
      throw ConfigError("topology: conv layer after FC");
    if (l.kind == LayerKind::pool &&
        (i == 0 || layers[i - 1].kind != LayerKind::conv))
      throw ConfigError("topology: pool must directly follow a conv layer");
  }
  return layers;
}

void resolve_shapes(std::vector<LayerSpec>& layers, std::array<int, 3> input_shape) {
  if (input_shape[0] < 1 || input_shape[1] < 1 || input_shape[2] < 1)
    throw ConfigError("topology: input shape must be positive");
  std::array<int, 3> cur = input_shape;
  for (auto& l : layers) {
    l.in_shape = cur;
    switch (l.kind) {
      case LayerKind::conv: {
        // Valid convolution, stride 1: each output dim shrinks by kernel-1.
        const int oh = cur[1] - l.kh + 1;
        const int ow = cur[2] - l.kw + 1;
        if (oh < 1 || ow < 1)
          throw ConfigError("topology: conv kernel " + std::to_string(l.kh) + "x" +
                            std::to_string(l.kw) + " larger than input " +
                            std::to_string(cur[1]) + "x" + std::to_string(cur[2]));
        cur = {l.channels, oh, ow};
        break;
      }
      case LayerKind::pool: {
        const int k = l.pool_k;
        if (cur[1] < k || cur[2] < k)
          throw ConfigError("topology: pool window exceeds input map");
        cur = {cur[0], cur[1] / k, cur[2] / k};
        break;
      }
      case LayerKind::fc:
        cur = {l.units, 1, 1};
        break;
    }
    l.out_shape = cur;
  }
}

std::string to_string(const LayerSpec& l) {
  std::ostringstream os;
  switch (l.kind) {
    case LayerKind::conv:
      os << "Cov" << l.kh << "*" << l.kw << "x" << l.channels;
      break;
    case LayerKind::pool:
      os << "S" << l.pool_k;
      break;
    case LayerKind::fc:
      os << "FC" << l.units;
      break;
  }
  return os.str();
}

std::string to_string(const std::vector<LayerSpec>& layers) {
  std::string out;
  for (size_t i = 0; i < layers.size(); ++i) {
    if (i) out += '-';
    out += to_string(layers[i]);
  }
  return out;
}

}  // namespace brpsnn
