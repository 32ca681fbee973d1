#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace gdsr {

/// Single-channel raster of doubles, row-major. Used for images, noise,
/// gradients and masks alike; images live in [0,1], everything else is
/// unbounded.
class ImageGrid {
public:
    ImageGrid() = default;
    ImageGrid(int height, int width, double fill = 0.0)
        : height_(height), width_(width) {
        if (height <= 0 || width <= 0)
            throw std::invalid_argument("shape mismatch: dimensions must be positive");
        data_.assign(static_cast<size_t>(height) * width, fill);
    }
    ImageGrid(int height, int width, std::vector<double> data)
        : height_(height), width_(width), data_(std::move(data)) {
        if (height <= 0 || width <= 0 ||
            data_.size() != static_cast<size_t>(height) * width)
            throw std::invalid_argument("shape mismatch: data length != height*width");
    }

    int height() const { return height_; }
    int width() const { return width_; }
    size_t size() const { return data_.size(); }

    double& at(int r, int c) { return data_[static_cast<size_t>(r) * width_ + c]; }
    double at(int r, int c) const { return data_[static_cast<size_t>(r) * width_ + c]; }
    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const ImageGrid& o) const {
        return height_ == o.height_ && width_ == o.width_;
    }
    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

inline void require_same_shape(const ImageGrid& a, const ImageGrid& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("shape mismatch");
}

ImageGrid add(const ImageGrid& a, const ImageGrid& b);
ImageGrid sub(const ImageGrid& a, const ImageGrid& b);
ImageGrid scale(const ImageGrid& a, double s);
ImageGrid add_scalar(const ImageGrid& a, double s);
ImageGrid hadamard(const ImageGrid& a, const ImageGrid& b);
double mean(const ImageGrid& a);
double variance(const ImageGrid& a);   // population variance
double stddev(const ImageGrid& a);
double l2_norm_sq(const ImageGrid& a, const ImageGrid& b);   // sum of squared diffs
double dot(const ImageGrid& a, const ImageGrid& b);
double rms(const ImageGrid& a);
ImageGrid clamp01(const ImageGrid& a);

/// Circular shift: output(r, c) = input((r - dy) mod H, (c - dx) mod W),
/// i.e. content moves down by dy and right by dx.
ImageGrid circular_shift(const ImageGrid& a, int dy, int dx);

}  // namespace gdsr
