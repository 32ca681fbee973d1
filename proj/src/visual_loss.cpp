#include "gdsr/visual_loss.hpp"

#include <cmath>

namespace gdsr {

ImageGrid magnitude_spectrum(const ImageGrid& img, const SpectralLossConfig& cfg) {
    ComplexSpectrum shifted = fftshift(fft2(img));
    ImageGrid m(img.height(), img.width());
    for (size_t i = 0; i < m.size(); ++i)
        m[i] = std::log1p(cfg.eps_log + std::abs(shifted[i]));
    return m;
}

ImageGrid normalize_spectrum(const ImageGrid& m, const SpectralLossConfig& cfg) {
    const double mu = mean(m);
    // constant input: the centered values carry only accumulation
    // roundoff, which the tiny eps_std guard would otherwise amplify
    double max_centered = 0.0;
    for (size_t i = 0; i < m.size(); ++i)
        max_centered = std::max(max_centered, std::abs(m[i] - mu));
    ImageGrid out(m.height(), m.width());
    if (max_centered <= 1e-12 * std::max(1.0, std::abs(mu))) return out;
    const double s = stddev(m) + cfg.eps_std;
    for (size_t i = 0; i < m.size(); ++i) out[i] = (m[i] - mu) / s;
    return out;
}

double visual_loss(const ImageGrid& hr, const ImageGrid& sr,
                   const SpectralLossConfig& cfg) {
    require_same_shape(hr, sr);
    ImageGrid a = normalize_spectrum(magnitude_spectrum(hr, cfg), cfg);
    ImageGrid b = normalize_spectrum(magnitude_spectrum(sr, cfg), cfg);
    return l2_norm_sq(a, b) / static_cast<double>(a.size());
}

ImageGrid visual_loss_grad(const ImageGrid& hr, const ImageGrid& sr,
                           const SpectralLossConfig& cfg) {
    require_same_shape(hr, sr);
    const size_t n = sr.size();
    const double N = static_cast<double>(n);

    // forward pieces on the sr side (hr side only contributes the residual)
    const ComplexSpectrum c = fftshift(fft2(sr));
    ImageGrid m(sr.height(), sr.width());
    for (size_t i = 0; i < n; ++i) m[i] = std::log1p(cfg.eps_log + std::abs(c[i]));
    const double mu = mean(m);
    const double s0 = stddev(m);
    const double s = s0 + cfg.eps_std;

    const ImageGrid p = normalize_spectrum(magnitude_spectrum(hr, cfg), cfg);

    // dL/dq where q = (m - mu)/s:  L = mean((p - q)^2)
    ImageGrid dq(sr.height(), sr.width());
    for (size_t i = 0; i < n; ++i) dq[i] = -2.0 * (p[i] - (m[i] - mu) / s) / N;

    // pull back through the normalization: q_k = (m_k - mu)/s with both mu
    // and s functions of m. For population std, ds/dm_i = (m_i - mu)/(N*s0).
    const double dq_mean = mean(dq);
    double dq_dot_d = 0.0;
    for (size_t i = 0; i < n; ++i) dq_dot_d += dq[i] * (m[i] - mu);
    ImageGrid dm(sr.height(), sr.width());
    for (size_t i = 0; i < n; ++i) {
        double v = (dq[i] - dq_mean) / s;
        if (s0 > 1e-300)
            v -= dq_dot_d * (m[i] - mu) / (N * s0 * s * s);
        dm[i] = v;
    }

    // through the log and the modulus: complex cotangent w = dm/(1+e+a) * c/|c|
    ComplexSpectrum w(sr.height(), sr.width());
    for (size_t i = 0; i < n; ++i) {
        const double a = std::abs(c[i]);
        if (a == 0.0) {
            w[i] = {0.0, 0.0};  // subgradient 0 at exact zeros
        } else {
            const double scale = dm[i] / (1.0 + cfg.eps_log + a) / a;
            w[i] = {scale * c[i].real(), scale * c[i].imag()};
        }
    }

    // undo the shift, then pull back through the DFT: for real input x and
    // unnormalized forward transform, grad_x = H*W * Re(ifft2(w)). The
    // cotangent has conjugate symmetry up to rounding, so take the real
    // part of the complex inverse rather than the realness-checked one.
    ComplexSpectrum inv = ifft2_complex(ifftshift(w));
    ImageGrid grad(sr.height(), sr.width());
    for (size_t i = 0; i < n; ++i) grad[i] = N * inv[i].real();
    return grad;
}

}  // namespace gdsr
