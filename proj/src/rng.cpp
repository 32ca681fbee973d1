#include "gdsr/rng.hpp"

#include <cmath>
#include <numbers>

namespace gdsr {

namespace {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer (Steele et al.), a bijection on 64-bit words
uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

uint64_t Rng::next_u64() {
    ++counter_;
    return mix(seed_ + counter_ * kGolden);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

uint64_t Rng::uniform_index(uint64_t n) {
    // modulo bias is ~n/2^64, irrelevant at desk scale
    return next_u64() % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0,1] keeps the log finite
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

ImageGrid Rng::normal_grid(int height, int width) {
    ImageGrid g(height, width);
    for (size_t i = 0; i < g.size(); ++i) g[i] = normal();
    return g;
}

Rng Rng::split(uint64_t stream) const {
    return Rng(mix(seed_ ^ ((stream + 1) * kGolden)));
}

}  // namespace gdsr
