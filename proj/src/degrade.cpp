#include "gdsr/degrade.hpp"

#include <cmath>
#include <stdexcept>

#include "gdsr/rng.hpp"

namespace gdsr {

DegradationModel::DegradationModel(int scale, ImageGrid kernel, double noise_std)
    : scale_(scale), kernel_(std::move(kernel)), noise_std_(noise_std) {
    if (scale < 1) throw std::invalid_argument("invalid range: scale must be >= 1");
    if (noise_std < 0.0)
        throw std::invalid_argument("invalid range: noise_std must be >= 0");
    if (kernel_.height() % 2 == 0 || kernel_.width() % 2 == 0)
        throw std::invalid_argument("invalid range: kernel must have odd dimensions");
    double s = 0.0;
    for (size_t i = 0; i < kernel_.size(); ++i) {
        if (kernel_[i] < 0.0)
            throw std::invalid_argument("invalid range: kernel must be nonnegative");
        s += kernel_[i];
    }
    if (std::abs(s - 1.0) > 1e-12)
        throw std::invalid_argument("invalid range: kernel must sum to 1");
}

DegradationModel DegradationModel::gaussian(int scale, double sigma,
                                            int kernel_size, double noise_std) {
    ImageGrid k(kernel_size, kernel_size);
    const int c = kernel_size / 2;
    double sum = 0.0;
    for (int y = 0; y < kernel_size; ++y)
        for (int x = 0; x < kernel_size; ++x) {
            double dy = y - c, dx = x - c;
            double v = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
            k.at(y, x) = v;
            sum += v;
        }
    for (size_t i = 0; i < k.size(); ++i) k[i] /= sum;
    return DegradationModel(scale, std::move(k), noise_std);
}

ImageGrid circular_convolve(const ImageGrid& img, const ImageGrid& kernel) {
    const int h = img.height(), w = img.width();
    const int kh = kernel.height(), kw = kernel.width();
    const int cy = kh / 2, cx = kw / 2;
    ImageGrid out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int ky = 0; ky < kh; ++ky) {
                int iy = ((y + ky - cy) % h + h) % h;
                for (int kx = 0; kx < kw; ++kx) {
                    int ix = ((x + kx - cx) % w + w) % w;
                    acc += kernel.at(ky, kx) * img.at(iy, ix);
                }
            }
            out.at(y, x) = acc;
        }
    return out;
}

namespace {

// adjoint of circular cross-correlation: correlate with the flipped kernel
ImageGrid circular_convolve_adjoint(const ImageGrid& img, const ImageGrid& kernel) {
    ImageGrid flipped(kernel.height(), kernel.width());
    for (int y = 0; y < kernel.height(); ++y)
        for (int x = 0; x < kernel.width(); ++x)
            flipped.at(y, x) = kernel.at(kernel.height() - 1 - y, kernel.width() - 1 - x);
    return circular_convolve(img, flipped);
}

}  // namespace

ImageGrid degrade(const ImageGrid& hr, const DegradationModel& d, Rng* rng) {
    const int s = d.scale();
    if (hr.height() % s != 0 || hr.width() % s != 0)
        throw std::invalid_argument("indivisible dimensions");
    ImageGrid blurred = circular_convolve(hr, d.kernel());
    const int lh = hr.height() / s, lw = hr.width() / s;
    ImageGrid lr(lh, lw);
    const double inv = 1.0 / (static_cast<double>(s) * s);
    for (int y = 0; y < lh; ++y)
        for (int x = 0; x < lw; ++x) {
            double acc = 0.0;
            for (int dy = 0; dy < s; ++dy)
                for (int dx = 0; dx < s; ++dx)
                    acc += blurred.at(y * s + dy, x * s + dx);
            lr.at(y, x) = acc * inv;
        }
    if (rng != nullptr && d.noise_std() > 0.0) {
        for (size_t i = 0; i < lr.size(); ++i)
            lr[i] = std::clamp(lr[i] + d.noise_std() * rng->normal(), 0.0, 1.0);
    }
    return lr;
}

ImageGrid degrade_adjoint(const ImageGrid& lr_residual, const DegradationModel& d) {
    const int s = d.scale();
    const int h = lr_residual.height() * s, w = lr_residual.width() * s;
    // adjoint of average pooling: replicate each LR value over its s x s
    // block scaled by 1/s^2
    ImageGrid up(h, w);
    const double inv = 1.0 / (static_cast<double>(s) * s);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            up.at(y, x) = lr_residual.at(y / s, x / s) * inv;
    return circular_convolve_adjoint(up, d.kernel());
}

namespace {

// Catmull-Rom (Keys, a = -0.5)
inline double cubic_weight(double t) {
    t = std::abs(t);
    if (t < 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
    if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
    return 0.0;
}

}  // namespace

ImageGrid bicubic_upsample(const ImageGrid& img, int factor) {
    if (factor < 1) throw std::invalid_argument("invalid range: factor must be >= 1");
    if (factor == 1) return img;
    const int sh = img.height(), sw = img.width();
    const int dh = sh * factor, dw = sw * factor;
    ImageGrid out(dh, dw);
    auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
    for (int y = 0; y < dh; ++y) {
        double sy = (y + 0.5) / factor - 0.5;
        int y0 = static_cast<int>(std::floor(sy));
        double fy = sy - y0;
        for (int x = 0; x < dw; ++x) {
            double sx = (x + 0.5) / factor - 0.5;
            int x0 = static_cast<int>(std::floor(sx));
            double fx = sx - x0;
            double acc = 0.0;
            for (int m = -1; m <= 2; ++m) {
                double wy = cubic_weight(m - fy);
                int iy = clampi(y0 + m, 0, sh - 1);
                for (int n = -1; n <= 2; ++n) {
                    double wx = cubic_weight(n - fx);
                    int ix = clampi(x0 + n, 0, sw - 1);
                    acc += wy * wx * img.at(iy, ix);
                }
            }
            out.at(y, x) = acc;
        }
    }
    return out;
}

}  // namespace gdsr
