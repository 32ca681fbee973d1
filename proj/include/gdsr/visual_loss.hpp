#pragma once

#include "gdsr/fft.hpp"
#include "gdsr/grid.hpp"

namespace gdsr {

struct SpectralLossConfig {
    /// Guard added to the standard deviation in spectrum normalization;
    /// resolves the constant-image degenerate case.
    double eps_std = 1e-8;
    /// Extra guard inside log(1 + |.|); the 1+ already keeps the log
    /// finite, so the default is 0.
    double eps_log = 0.0;
};

/// log(1 + eps_log + |fftshift(fft2(img))|) as a real grid.
ImageGrid magnitude_spectrum(const ImageGrid& img,
                             const SpectralLossConfig& cfg = {});

/// (m - mean(m)) / (std(m) + eps_std); population std.
ImageGrid normalize_spectrum(const ImageGrid& m, const SpectralLossConfig& cfg = {});

/// Pixel-mean squared difference of the normalized log-magnitude spectra.
double visual_loss(const ImageGrid& hr, const ImageGrid& sr,
                   const SpectralLossConfig& cfg = {});

/// Exact gradient of visual_loss w.r.t. sr: chain rule through
/// normalization, log, |.| (subgradient 0 at exact zeros), fftshift and
/// the DFT, the last step via one inverse transform of the complex
/// cotangent.
ImageGrid visual_loss_grad(const ImageGrid& hr, const ImageGrid& sr,
                           const SpectralLossConfig& cfg = {});

}  // namespace gdsr
