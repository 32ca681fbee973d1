#include "gdsr/dataset.hpp"

#include <cmath>
#include <stdexcept>

namespace gdsr {

namespace {

ImageGrid synth_one(int size, Rng& rng) {
    ImageGrid img(size, size);

    // smooth background: 3..6 Gaussian blobs
    const int blobs = 3 + static_cast<int>(rng.uniform_index(4));
    for (int b = 0; b < blobs; ++b) {
        const double cy = rng.uniform(0.0, size);
        const double cx = rng.uniform(0.0, size);
        const double sig = rng.uniform(0.12, 0.45) * size;
        const double amp = rng.uniform(0.25, 1.0);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double dy = y - cy, dx = x - cx;
                img.at(y, x) += amp * std::exp(-(dy * dy + dx * dx) / (2.0 * sig * sig));
            }
    }

    // sharp foreground: 2..5 rectangles/bars with distinct intensities
    const int shapes = 2 + static_cast<int>(rng.uniform_index(4));
    for (int s = 0; s < shapes; ++s) {
        const bool bar = rng.uniform() < 0.4;
        int rh, rw;
        if (bar) {
            rh = 1 + static_cast<int>(rng.uniform_index(std::max(1, size / 16)));
            rw = size / 4 + static_cast<int>(rng.uniform_index(std::max(1, size / 2)));
        } else {
            rh = size / 10 + static_cast<int>(rng.uniform_index(std::max(1, size / 4)));
            rw = size / 10 + static_cast<int>(rng.uniform_index(std::max(1, size / 4)));
        }
        rh = std::min(rh, size);
        rw = std::min(rw, size);
        const int y0 = static_cast<int>(rng.uniform_index(std::max(1, size - rh)));
        const int x0 = static_cast<int>(rng.uniform_index(std::max(1, size - rw)));
        const double delta = rng.uniform(-0.9, 0.9);
        for (int y = y0; y < y0 + rh; ++y)
            for (int x = x0; x < x0 + rw; ++x) img.at(y, x) += delta;
    }

    // min-max normalize to [0,1]
    double lo = img[0], hi = img[0];
    for (size_t i = 0; i < img.size(); ++i) {
        lo = std::min(lo, img[i]);
        hi = std::max(hi, img[i]);
    }
    const double span = hi - lo;
    if (span < 1e-9) return ImageGrid(size, size, 0.5);  // degenerate draw
    for (size_t i = 0; i < img.size(); ++i) img[i] = (img[i] - lo) / span;
    return img;
}

}  // namespace

std::vector<ImageGrid> synth_thermal_dataset(int n, int size, Rng& rng) {
    if (size < 16) throw std::invalid_argument("invalid range: size must be >= 16");
    if (n < 0) throw std::invalid_argument("invalid range: n must be >= 0");
    std::vector<ImageGrid> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) out.push_back(synth_one(size, rng));
    return out;
}

}  // namespace gdsr
