#pragma once

#include <complex>
#include <vector>

#include "gdsr/grid.hpp"

namespace gdsr {

/// 2D complex spectrum, row-major, same indexing as ImageGrid.
class ComplexSpectrum {
public:
    ComplexSpectrum() = default;
    ComplexSpectrum(int height, int width)
        : height_(height), width_(width),
          data_(static_cast<size_t>(height) * width) {
        if (height <= 0 || width <= 0)
            throw std::invalid_argument("shape mismatch: dimensions must be positive");
    }

    int height() const { return height_; }
    int width() const { return width_; }
    size_t size() const { return data_.size(); }

    std::complex<double>& at(int r, int c) {
        return data_[static_cast<size_t>(r) * width_ + c];
    }
    const std::complex<double>& at(int r, int c) const {
        return data_[static_cast<size_t>(r) * width_ + c];
    }
    std::complex<double>& operator[](size_t i) { return data_[i]; }
    const std::complex<double>& operator[](size_t i) const { return data_[i]; }

    std::vector<std::complex<double>>& data() { return data_; }
    const std::vector<std::complex<double>>& data() const { return data_; }

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::complex<double>> data_;
};

/// Forward 2D DFT, unnormalized double-sum convention:
///   F(u,v) = sum_{x,y} I(x,y) exp(-2*pi*i*u*x/H) exp(-2*pi*i*v*y/W).
/// Mixed-radix Cooley-Tukey with a direct transform for prime factors,
/// so non-power-of-two sizes transform exactly.
ComplexSpectrum fft2(const ImageGrid& img);

/// Inverse 2D DFT with 1/(H*W) normalization. The result must be real:
/// imaginary residue above 1e-9 throws ("non-real inverse").
ImageGrid ifft2(const ComplexSpectrum& spec);

/// Inverse 2D DFT kept complex (no realness requirement). Used where the
/// input has no conjugate symmetry, e.g. adjoint/cotangent transforms.
ComplexSpectrum ifft2_complex(const ComplexSpectrum& spec);

/// Move entry (u,v) to ((u+floor(H/2)) mod H, (v+floor(W/2)) mod W); DC
/// lands at the center bin.
ComplexSpectrum fftshift(const ComplexSpectrum& spec);

/// Exact inverse of fftshift (differs from it for odd dimensions).
ComplexSpectrum ifftshift(const ComplexSpectrum& spec);

}  // namespace gdsr
