#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace brpsnn {

// splitmix64 step; advances the state and returns a mixed 64-bit value.
inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives one stream seed from a root seed and a path of ids
// (purpose tag, epoch, sample index, ...).  Each distinct path gives an
// independent-looking seed, so shuffling, init, and encoding never share
// a stream and adding draws to one consumer cannot shift another.
inline uint64_t derive_seed(uint64_t root, std::initializer_list<uint64_t> path) {
  uint64_t s = root;
  uint64_t out = splitmix64(s);
  for (uint64_t id : path) {
    s = out ^ (id + 0x9e3779b97f4a7c15ULL);
    out = splitmix64(s);
  }
  return out;
}

// Deterministic generator for one stream.  All randomness in the engine
// flows through this wrapper so sequences are reproducible bit-for-bit.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  Rng(uint64_t root, std::initializer_list<uint64_t> path)
      : engine_(derive_seed(root, path)) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0,1) with 53 significand bits; identical across platforms.
  double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n must be positive.  Rejection-free modulo
  // is avoided to keep the distribution exact.
  uint64_t below(uint64_t n) {
    uint64_t threshold = -n % n;  // 2^64 mod n
    for (;;) {
      uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Stream purpose tags used when deriving seeds; keeping them in one place
// guarantees two subsystems never collide on a path.
namespace stream {
constexpr uint64_t kWeightInit = 1;
constexpr uint64_t kFeedback = 2;
constexpr uint64_t kShuffle = 3;
constexpr uint64_t kTrainEncode = 4;
constexpr uint64_t kEvalEncode = 5;
constexpr uint64_t kSynthData = 6;
constexpr uint64_t kProbe = 7;
}  // namespace stream

}  // namespace brpsnn
