#pragma once

#include <cstdint>
#include <vector>

#include "gdsr/grid.hpp"

namespace gdsr {

class Rng;

/// Channel-major stack of H x W planes.
struct Tensor3 {
    int channels = 0, height = 0, width = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w),
          data(static_cast<size_t>(c) * h * w, fill) {}

    double* plane(int c) { return data.data() + static_cast<size_t>(c) * height * width; }
    const double* plane(int c) const {
        return data.data() + static_cast<size_t>(c) * height * width;
    }
    double& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    size_t size() const { return data.size(); }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

Tensor3 tensor_from_grid(const ImageGrid& g);
ImageGrid grid_from_plane(const Tensor3& t, int c);

/// Weights of one conv layer: cross-correlation, odd kernel, circular
/// (periodic) padding. Bias may be empty for bias-free layers.
struct ConvKernel {
    int out_ch = 0, in_ch = 0, ksize = 0;
    std::vector<double> w;  // [out][in][ky][kx]
    std::vector<double> b;  // [out] or empty

    ConvKernel() = default;
    ConvKernel(int out_channels, int in_channels, int kernel_size, bool bias);

    double& wat(int o, int i, int ky, int kx) {
        return w[((static_cast<size_t>(o) * in_ch + i) * ksize + ky) * ksize + kx];
    }
    double wat(int o, int i, int ky, int kx) const {
        return w[((static_cast<size_t>(o) * in_ch + i) * ksize + ky) * ksize + kx];
    }

    /// Uniform fan-in init: U(-1/sqrt(in_ch*k*k), +1/sqrt(in_ch*k*k)), bias 0.
    void init_uniform_fan_in(Rng& rng);
};

void conv_forward(const ConvKernel& k, const Tensor3& in, Tensor3& out);
/// din += adjoint of conv_forward applied to dout (din must be pre-sized,
/// caller zeroes it).
void conv_backward_input(const ConvKernel& k, const Tensor3& dout, Tensor3& din);
/// Accumulates weight/bias gradients into grad (same geometry as k).
void conv_backward_weights(const ConvKernel& k, const Tensor3& in,
                           const Tensor3& dout, ConvKernel& grad);

void tanh_forward(const Tensor3& z, Tensor3& h);
/// dz = dh * (1 - h^2), h being the tanh output.
void tanh_backward(const Tensor3& h, const Tensor3& dh, Tensor3& dz);

}  // namespace gdsr
