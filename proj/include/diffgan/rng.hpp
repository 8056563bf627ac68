#pragma once

#include <cstdint>

namespace diffgan {

/// Deterministic per-purpose random stream.
///
/// xoshiro256++ seeded from (seed, stream_id) via splitmix64. The same
/// (seed, stream_id) pair always yields the same sequence, independent of
/// platform and of any other stream, so every consumer of randomness can
/// derive its own stream instead of sharing mutable state.
class Rng {
public:
    Rng(uint64_t seed, uint64_t stream_id);

    uint64_t seed() const { return seed_; }
    uint64_t stream_id() const { return stream_id_; }

    uint64_t next_u64();

    /// Uniform in [0, 1).
    double uniform();

    /// Uniform in (0, 1] (safe for log()).
    double uniform_open();

    /// Uniform integer in [lo, hi], inclusive. Unbiased via rejection.
    int64_t uniform_int(int64_t lo, int64_t hi);

    /// Standard normal via Box-Muller; pairs are generated and the spare
    /// value is cached within the instance.
    double normal();

private:
    uint64_t seed_ = 0;
    uint64_t stream_id_ = 0;
    uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Stream id composition helper: purpose tag in the high bits, a counter
/// (iteration, image index, ...) in the low bits.
constexpr uint64_t stream_id(uint64_t purpose, uint64_t counter = 0) {
    return (purpose << 40) ^ counter;
}

}  // namespace diffgan
