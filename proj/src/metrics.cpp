#include "brpsnn/metrics.hpp"

#include <cstdio>
#include <fstream>

namespace brpsnn {

double silent_fraction(std::span<const uint32_t> spike_counts) {
  if (spike_counts.empty()) throw ContractError("silent_fraction: empty counts");
  size_t silent = 0;
  for (uint32_t c : spike_counts) silent += c == 0;
  return (double)silent / (double)spike_counts.size();
}

std::string csv_to_string(const std::vector<EpochRow>& rows) {
  std::string out = "epoch,split,accuracy,loss,silent_conv,silent_fc,fwd_ops,upd_ops,wall_ms\n";
  char buf[256];
  for (const EpochRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.6f,%.8f,%.6f,%.6f,%llu,%llu,%llu\n", r.epoch,
                  r.split.c_str(), r.accuracy, r.loss, r.silent_conv, r.silent_fc,
                  (unsigned long long)r.fwd_ops, (unsigned long long)r.upd_ops,
                  (unsigned long long)r.wall_ms);
    out += buf;
  }
  return out;
}

void emit_csv(const std::vector<EpochRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: no newline translation
  if (!out) throw DataError(path + ": cannot open for writing");
  const std::string s = csv_to_string(rows);
  out.write(s.data(), (std::streamsize)s.size());
  if (!out) throw DataError(path + ": write failure");
}

}  // namespace brpsnn
