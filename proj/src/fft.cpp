#include "gdsr/fft.hpp"

#include <cmath>
#include <numbers>

namespace gdsr {

namespace {

using cdouble = std::complex<double>;

int smallest_prime_factor(int n) {
    for (int p = 2; p * p <= n; ++p)
        if (n % p == 0) return p;
    return n;
}

/// One 1D transform of length n, reading in[i*in_stride] and writing a
/// contiguous out[0..n). roots must hold exp(sign*2*pi*i*j/N) for the
/// full outer length N; root_stride maps this sublength onto that table
/// (n * root_stride == N at every recursion level).
void fft_recurse(const cdouble* in, size_t in_stride, cdouble* out, int n,
                 const std::vector<cdouble>& roots, size_t root_stride,
                 std::vector<cdouble>& scratch, size_t scratch_off) {
    if (n == 1) {
        out[0] = in[0];
        return;
    }
    const int p = smallest_prime_factor(n);
    const int m = n / p;
    if (p == n) {
        // prime length: direct transform
        for (int k = 0; k < n; ++k) {
            cdouble acc(0.0, 0.0);
            for (int j = 0; j < n; ++j)
                acc += in[static_cast<size_t>(j) * in_stride] *
                       roots[(static_cast<size_t>(j) * k % n) * root_stride];
            out[k] = acc;
        }
        return;
    }
    // decimation in time: p interleaved sub-transforms of length m
    for (int r = 0; r < p; ++r)
        fft_recurse(in + static_cast<size_t>(r) * in_stride, in_stride * p,
                    out + static_cast<size_t>(r) * m, m, roots,
                    root_stride * p, scratch, scratch_off + n);
    cdouble* tmp = scratch.data() + scratch_off;
    for (int k = 0; k < n; ++k) {
        const int km = k % m;
        cdouble acc(0.0, 0.0);
        for (int r = 0; r < p; ++r)
            acc += out[static_cast<size_t>(r) * m + km] *
                   roots[(static_cast<size_t>(r) * k % n) * root_stride];
        tmp[k] = acc;
    }
    for (int k = 0; k < n; ++k) out[k] = tmp[k];
}

std::vector<cdouble> make_roots(int n, double sign) {
    std::vector<cdouble> roots(n);
    for (int j = 0; j < n; ++j) {
        double ang = sign * 2.0 * std::numbers::pi * j / n;
        roots[j] = cdouble(std::cos(ang), std::sin(ang));
    }
    return roots;
}

// scratch needs sum of lengths over recursion levels; 2*n is a safe bound
// (n + n/p + n/(p*q) + ... < 2n).
void fft_1d_inplace_rows(std::vector<cdouble>& data, int h, int w, double sign) {
    auto roots = make_roots(w, sign);
    std::vector<cdouble> scratch(2 * static_cast<size_t>(w));
    std::vector<cdouble> row(w);
    for (int r = 0; r < h; ++r) {
        fft_recurse(data.data() + static_cast<size_t>(r) * w, 1, row.data(), w,
                    roots, 1, scratch, 0);
        for (int c = 0; c < w; ++c) data[static_cast<size_t>(r) * w + c] = row[c];
    }
}

void fft_1d_inplace_cols(std::vector<cdouble>& data, int h, int w, double sign) {
    auto roots = make_roots(h, sign);
    std::vector<cdouble> scratch(2 * static_cast<size_t>(h));
    std::vector<cdouble> col(h);
    for (int c = 0; c < w; ++c) {
        fft_recurse(data.data() + c, w, col.data(), h, roots, 1, scratch, 0);
        for (int r = 0; r < h; ++r) data[static_cast<size_t>(r) * w + c] = col[r];
    }
}

ComplexSpectrum transform2d(const ComplexSpectrum& in, double sign) {
    ComplexSpectrum out = in;
    fft_1d_inplace_rows(out.data(), out.height(), out.width(), sign);
    fft_1d_inplace_cols(out.data(), out.height(), out.width(), sign);
    return out;
}

}  // namespace

ComplexSpectrum fft2(const ImageGrid& img) {
    if (!img.all_finite())
        throw std::invalid_argument("fft2: input must be finite");
    ComplexSpectrum spec(img.height(), img.width());
    for (size_t i = 0; i < img.size(); ++i) spec[i] = cdouble(img[i], 0.0);
    return transform2d(spec, -1.0);
}

ComplexSpectrum ifft2_complex(const ComplexSpectrum& spec) {
    ComplexSpectrum out = transform2d(spec, +1.0);
    const double norm = 1.0 / (static_cast<double>(spec.height()) * spec.width());
    for (size_t i = 0; i < out.size(); ++i) out[i] *= norm;
    return out;
}

ImageGrid ifft2(const ComplexSpectrum& spec) {
    for (size_t i = 0; i < spec.size(); ++i)
        if (!std::isfinite(spec[i].real()) || !std::isfinite(spec[i].imag()))
            throw std::invalid_argument("ifft2: input must be finite");
    ComplexSpectrum full = ifft2_complex(spec);
    ImageGrid out(spec.height(), spec.width());
    for (size_t i = 0; i < full.size(); ++i) {
        if (std::abs(full[i].imag()) > 1e-9)
            throw std::runtime_error("non-real inverse");
        out[i] = full[i].real();
    }
    return out;
}

ComplexSpectrum fftshift(const ComplexSpectrum& spec) {
    const int h = spec.height(), w = spec.width();
    ComplexSpectrum out(h, w);
    const int sh = h / 2, sw = w / 2;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            out.at((r + sh) % h, (c + sw) % w) = spec.at(r, c);
    return out;
}

ComplexSpectrum ifftshift(const ComplexSpectrum& spec) {
    const int h = spec.height(), w = spec.width();
    ComplexSpectrum out(h, w);
    const int sh = h / 2, sw = w / 2;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            out.at(r, c) = spec.at((r + sh) % h, (c + sw) % w);
    return out;
}

}  // namespace gdsr
