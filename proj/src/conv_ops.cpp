#include "gdsr/conv_ops.hpp"

#include <cmath>
#include <stdexcept>

#include "gdsr/rng.hpp"

namespace gdsr {

namespace {

// out[x] += a * in[(x + s) mod W]; |s| < W assumed. Middle segment is a
// straight strided axpy so it vectorizes; the <= |s| wrapped elements are
// handled at the ends.
inline void axpy_shifted_wrap(double a, const double* in, double* out, int W,
                              int s) {
    if (s >= 0) {
        int n = W - s;
        for (int x = 0; x < n; ++x) out[x] += a * in[x + s];
        for (int x = n; x < W; ++x) out[x] += a * in[x + s - W];
    } else {
        for (int x = 0; x < -s; ++x) out[x] += a * in[x + s + W];
        for (int x = -s; x < W; ++x) out[x] += a * in[x + s];
    }
}

// sum_x u[x] * v[(x + s) mod W]
inline double dot_shifted_wrap(const double* u, const double* v, int W, int s) {
    double acc = 0.0;
    if (s >= 0) {
        int n = W - s;
        for (int x = 0; x < n; ++x) acc += u[x] * v[x + s];
        for (int x = n; x < W; ++x) acc += u[x] * v[x + s - W];
    } else {
        for (int x = 0; x < -s; ++x) acc += u[x] * v[x + s + W];
        for (int x = -s; x < W; ++x) acc += u[x] * v[x + s];
    }
    return acc;
}

inline int wrap(int i, int n) { return ((i % n) + n) % n; }

}  // namespace

Tensor3 tensor_from_grid(const ImageGrid& g) {
    Tensor3 t(1, g.height(), g.width());
    std::copy(g.data().begin(), g.data().end(), t.data.begin());
    return t;
}

ImageGrid grid_from_plane(const Tensor3& t, int c) {
    ImageGrid g(t.height, t.width);
    const double* p = t.plane(c);
    std::copy(p, p + g.size(), g.data().begin());
    return g;
}

ConvKernel::ConvKernel(int out_channels, int in_channels, int kernel_size,
                       bool bias)
    : out_ch(out_channels), in_ch(in_channels), ksize(kernel_size),
      w(static_cast<size_t>(out_channels) * in_channels * kernel_size * kernel_size, 0.0),
      b(bias ? out_channels : 0, 0.0) {
    if (kernel_size % 2 == 0)
        throw std::invalid_argument("incompatible shape: kernel size must be odd");
}

void ConvKernel::init_uniform_fan_in(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch) * ksize * ksize);
    for (double& v : w) v = rng.uniform(-bound, bound);
    for (double& v : b) v = 0.0;
}

void conv_forward(const ConvKernel& k, const Tensor3& in, Tensor3& out) {
    if (in.channels != k.in_ch || out.channels != k.out_ch ||
        in.height != out.height || in.width != out.width)
        throw std::invalid_argument("incompatible shape");
    const int H = in.height, W = in.width, c = k.ksize / 2;
    out.zero();
    for (int o = 0; o < k.out_ch; ++o) {
        for (int y = 0; y < H; ++y) {
            double* orow = out.plane(o) + static_cast<size_t>(y) * W;
            for (int i = 0; i < k.in_ch; ++i) {
                for (int ky = 0; ky < k.ksize; ++ky) {
                    const double* irow =
                        in.plane(i) + static_cast<size_t>(wrap(y + ky - c, H)) * W;
                    for (int kx = 0; kx < k.ksize; ++kx)
                        axpy_shifted_wrap(k.wat(o, i, ky, kx), irow, orow, W, kx - c);
                }
            }
            if (!k.b.empty())
                for (int x = 0; x < W; ++x) orow[x] += k.b[o];
        }
    }
}

void conv_backward_input(const ConvKernel& k, const Tensor3& dout, Tensor3& din) {
    if (din.channels != k.in_ch || dout.channels != k.out_ch ||
        din.height != dout.height || din.width != dout.width)
        throw std::invalid_argument("incompatible shape");
    const int H = dout.height, W = dout.width, c = k.ksize / 2;
    for (int o = 0; o < k.out_ch; ++o) {
        for (int y = 0; y < H; ++y) {
            const double* drow = dout.plane(o) + static_cast<size_t>(y) * W;
            for (int i = 0; i < k.in_ch; ++i) {
                for (int ky = 0; ky < k.ksize; ++ky) {
                    double* irow =
                        din.plane(i) + static_cast<size_t>(wrap(y + ky - c, H)) * W;
                    for (int kx = 0; kx < k.ksize; ++kx)
                        axpy_shifted_wrap(k.wat(o, i, ky, kx), drow, irow, W, -(kx - c));
                }
            }
        }
    }
}

void conv_backward_weights(const ConvKernel& k, const Tensor3& in,
                           const Tensor3& dout, ConvKernel& grad) {
    if (grad.out_ch != k.out_ch || grad.in_ch != k.in_ch || grad.ksize != k.ksize)
        throw std::invalid_argument("incompatible shape");
    const int H = in.height, W = in.width, c = k.ksize / 2;
    for (int o = 0; o < k.out_ch; ++o) {
        for (int y = 0; y < H; ++y) {
            const double* drow = dout.plane(o) + static_cast<size_t>(y) * W;
            for (int i = 0; i < k.in_ch; ++i) {
                for (int ky = 0; ky < k.ksize; ++ky) {
                    const double* irow =
                        in.plane(i) + static_cast<size_t>(wrap(y + ky - c, H)) * W;
                    for (int kx = 0; kx < k.ksize; ++kx)
                        grad.wat(o, i, ky, kx) += dot_shifted_wrap(drow, irow, W, kx - c);
                }
            }
        }
        if (!grad.b.empty()) {
            const double* p = dout.plane(o);
            double acc = 0.0;
            for (size_t j = 0; j < static_cast<size_t>(H) * W; ++j) acc += p[j];
            grad.b[o] += acc;
        }
    }
}

void tanh_forward(const Tensor3& z, Tensor3& h) {
    h = z;
    for (double& v : h.data) v = std::tanh(v);
}

void tanh_backward(const Tensor3& h, const Tensor3& dh, Tensor3& dz) {
    dz = dh;
    for (size_t i = 0; i < dz.data.size(); ++i)
        dz.data[i] *= 1.0 - h.data[i] * h.data[i];
}

}  // namespace gdsr
