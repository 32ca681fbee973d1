#pragma once

#include "gdsr/grid.hpp"

namespace gdsr {

/// 10*log10(peak^2 / MSE), capped into [0, 99]; zero MSE returns the
/// 99 dB cap.
double psnr(const ImageGrid& a, const ImageGrid& b, double peak = 1.0);

/// Single-scale SSIM: sliding 8x8 uniform windows (stride 1, valid
/// positions only), stabilizers C1 = (0.01*peak)^2, C2 = (0.03*peak)^2
/// with peak 1. Mean of the local SSIM map.
double ssim(const ImageGrid& a, const ImageGrid& b);

}  // namespace gdsr
