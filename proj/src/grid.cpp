#include "gdsr/grid.hpp"

#include <algorithm>

namespace gdsr {

ImageGrid add(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b);
    ImageGrid out(a.height(), a.width());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

ImageGrid sub(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b);
    ImageGrid out(a.height(), a.width());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

ImageGrid scale(const ImageGrid& a, double s) {
    ImageGrid out(a.height(), a.width());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

ImageGrid add_scalar(const ImageGrid& a, double s) {
    ImageGrid out(a.height(), a.width());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s;
    return out;
}

ImageGrid hadamard(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b);
    ImageGrid out(a.height(), a.width());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

double mean(const ImageGrid& a) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i];
    return s / static_cast<double>(a.size());
}

double variance(const ImageGrid& a) {
    double m = mean(a);
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - m;
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

double stddev(const ImageGrid& a) { return std::sqrt(variance(a)); }

double l2_norm_sq(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b);
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double dot(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b);
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double rms(const ImageGrid& a) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * a[i];
    return std::sqrt(s / static_cast<double>(a.size()));
}

ImageGrid clamp01(const ImageGrid& a) {
    ImageGrid out(a.height(), a.width());
    for (size_t i = 0; i < a.size(); ++i) out[i] = std::clamp(a[i], 0.0, 1.0);
    return out;
}

ImageGrid circular_shift(const ImageGrid& a, int dy, int dx) {
    const int h = a.height(), w = a.width();
    ImageGrid out(h, w);
    // normalize shifts into [0, h) / [0, w)
    dy = ((dy % h) + h) % h;
    dx = ((dx % w) + w) % w;
    for (int r = 0; r < h; ++r) {
        int sr = (r - dy + h) % h;
        for (int c = 0; c < w; ++c) {
            int sc = (c - dx + w) % w;
            out.at(r, c) = a.at(sr, sc);
        }
    }
    return out;
}

}  // namespace gdsr
