#pragma once

#include <cstdint>

#include "gdsr/grid.hpp"

namespace gdsr {

/// Counter-based deterministic generator: draw i is a fixed bijective mix
/// of (seed + i * golden), so equal seeds give bit-equal streams on any
/// platform. Normals come from Box-Muller over the uniform stream (the
/// spare sample is cached, so normals interleave deterministically too).
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed) {}

    uint64_t seed() const { return seed_; }
    uint64_t next_u64();
    /// Uniform in [0, 1), 53-bit resolution.
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);
    /// Integer in [0, n), n > 0.
    uint64_t uniform_index(uint64_t n);
    /// Standard normal.
    double normal();
    ImageGrid normal_grid(int height, int width);

    /// Independent child stream; deterministic in (seed, stream).
    Rng split(uint64_t stream) const;

private:
    uint64_t seed_ = 0;
    uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace gdsr
