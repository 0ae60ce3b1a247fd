#pragma once

#include <cmath>
#include <cstdint>

namespace qrng {

/// SplitMix64 step; used for seeding and for deriving independent
/// sub-stream seeds.  The mixing constants are the reference ones.
inline uint64_t splitmix64_next(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Deterministic sub-seed for a named stream of a run.  Every stochastic
/// stage of the pipeline (arrivals, routing, per-channel thinning, dark
/// counts, sampling) draws from its own generator seeded with
/// derive_subseed(master_seed, stream_id), so stages can be reordered or
/// parallelised without changing each other's draws.
inline uint64_t derive_subseed(uint64_t master_seed, uint64_t stream_id) {
  uint64_t s = master_seed;
  (void)splitmix64_next(s);
  s ^= 0xA3EC647659359ACDULL * (stream_id + 1);
  return splitmix64_next(s);
}

/// xoshiro256++ by Blackman & Vigna: fast, 256-bit state, well studied.
/// Seeded through SplitMix64 so that any 64-bit seed (including 0) yields
/// a valid state.
class Xoshiro256pp {
 public:
  using result_type = uint64_t;

  explicit Xoshiro256pp(uint64_t seed = 0) {
    uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64_next(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ULL; }

  result_type operator()() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53 bits of precision.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1]; safe as a log() argument.
  double uniform_pos() { return 1.0 - uniform(); }

  /// Exponential with the given rate (mean 1/rate).
  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  /// Bernoulli with success probability p.
  bool bernoulli(double p) { return uniform() < p; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

}  // namespace qrng
