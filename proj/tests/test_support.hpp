#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "gdsr/grid.hpp"
#include "gdsr/rng.hpp"

namespace gdsr::test {

inline ImageGrid random_grid(Rng& rng, int h, int w, double lo = 0.0,
                             double hi = 1.0) {
    ImageGrid g(h, w);
    for (size_t i = 0; i < g.size(); ++i) g[i] = rng.uniform(lo, hi);
    return g;
}

/// Direct O(N^4) double-sum DFT, the independent oracle for fft2.
inline std::vector<std::complex<double>> naive_dft2(const ImageGrid& img) {
    const int H = img.height(), W = img.width();
    std::vector<std::complex<double>> out(static_cast<size_t>(H) * W);
    for (int u = 0; u < H; ++u)
        for (int v = 0; v < W; ++v) {
            std::complex<double> acc(0.0, 0.0);
            for (int x = 0; x < H; ++x)
                for (int y = 0; y < W; ++y) {
                    const double ang =
                        -2.0 * std::numbers::pi *
                        (static_cast<double>(u) * x / H + static_cast<double>(v) * y / W);
                    acc += img.at(x, y) *
                           std::complex<double>(std::cos(ang), std::sin(ang));
                }
            out[static_cast<size_t>(u) * W + v] = acc;
        }
    return out;
}

/// Central-difference gradient check: ||g - g_fd|| / ||g_fd||.
inline double fd_rel_error(const std::function<double(const ImageGrid&)>& f,
                           const ImageGrid& grad, ImageGrid x, double h = 1e-4) {
    double dn = 0.0, fn = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double fp = f(x);
        x[i] = keep - h;
        const double fm = f(x);
        x[i] = keep;
        const double fd = (fp - fm) / (2.0 * h);
        const double d = grad[i] - fd;
        dn += d * d;
        fn += fd * fd;
    }
    return std::sqrt(dn) / std::max(std::sqrt(fn), 1e-300);
}

inline double max_abs_diff(const ImageGrid& a, const ImageGrid& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline bool bitwise_equal(const ImageGrid& a, const ImageGrid& b) {
    return a.same_shape(b) && a.data() == b.data();
}

}  // namespace gdsr::test
