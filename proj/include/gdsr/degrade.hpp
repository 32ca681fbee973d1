#pragma once

#include "gdsr/grid.hpp"

namespace gdsr {

class Rng;

/// Linear HR -> LR map: circular blur with a normalized kernel, then
/// non-overlapping average pooling by `scale`, then optional additive
/// Gaussian noise (clamped to [0,1]). Circular convolution keeps the
/// adjoint exact and boundary-free.
class DegradationModel {
public:
    DegradationModel(int scale, ImageGrid kernel, double noise_std = 0.0);
    /// Gaussian kernel of odd size k, std `sigma`, normalized to sum 1.
    static DegradationModel gaussian(int scale = 4, double sigma = 1.0,
                                     int kernel_size = 5, double noise_std = 0.0);

    int scale() const { return scale_; }
    double noise_std() const { return noise_std_; }
    const ImageGrid& kernel() const { return kernel_; }

private:
    int scale_;
    ImageGrid kernel_;
    double noise_std_;
};

/// Blur + pool (+ noise when rng given and noise_std > 0). Dimensions
/// must be divisible by the scale.
ImageGrid degrade(const ImageGrid& hr, const DegradationModel& d,
                  Rng* rng = nullptr);

/// Transpose of the noise-free blur+pool map.
ImageGrid degrade_adjoint(const ImageGrid& lr_residual, const DegradationModel& d);

/// Circular (periodic) 2D convolution with an odd kernel.
ImageGrid circular_convolve(const ImageGrid& img, const ImageGrid& kernel);

/// Catmull-Rom bicubic upsampling by an integer factor, borders clamped.
ImageGrid bicubic_upsample(const ImageGrid& img, int factor);

}  // namespace gdsr
