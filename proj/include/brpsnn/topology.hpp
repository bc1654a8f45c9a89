#pragma once

#include <array>
#include <string>
#include <vector>

#include "brpsnn/errors.hpp"

namespace brpsnn {

enum class LayerKind { conv, pool, fc };

// One parsed layer token.  Shapes are resolved later when the input
// dimensions are known; until then in_shape/out_shape stay zero.
struct LayerSpec {
  LayerKind kind{};
  int kh = 0, kw = 0, channels = 0;  // conv
  int pool_k = 0;                    // pool
  int units = 0;                     // fc
  std::array<int, 3> in_shape{0, 0, 0};   // {C, H, W}; fc uses {n, 1, 1}
  std::array<int, 3> out_shape{0, 0, 0};

  bool has_neurons() const { return kind != LayerKind::pool; }
  int out_size() const { return out_shape[0] * out_shape[1] * out_shape[2]; }
  int in_size() const { return in_shape[0] * in_shape[1] * in_shape[2]; }
};

// Parses a topology string such as "Cov5*5x28(valid,stride1)-FC1000-FC10".
//
//   topology   = layer , { "-" , layer } ;
//   layer      = conv | pool | fc ;
//   conv       = "Cov" , int , "*" , int , "x" , int , [ "(" , annot-list , ")" ] ;
//   pool       = "S" , int ;          (* S1 identity, S2 = 2x2 stride-2 OR pool *)
//   fc         = "FC" , int ;
//   annot-list = annot , { "," , annot } ;
//   annot      = "valid" | "stride1" ; (* both restate the defaults *)
//
// Structural rules enforced here: at least one layer, the last layer is FC,
// conv may not follow fc, pool must follow conv.
std::vector<LayerSpec> parse_topology(const std::string& text);

// Fills in_shape/out_shape given the input dimensions {C, H, W}.
// Throws ConfigError when a kernel or pool does not fit.
void resolve_shapes(std::vector<LayerSpec>& layers, std::array<int, 3> input_shape);

std::string to_string(const LayerSpec& layer);
// Canonical form: annotations are dropped (valid padding and stride 1 are the
// only accepted values, so they carry no information).
std::string to_string(const std::vector<LayerSpec>& layers);

}  // namespace brpsnn
