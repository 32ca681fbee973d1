#pragma once

#include <cstdint>
#include <vector>

#include "gdsr/conv_ops.hpp"
#include "gdsr/grid.hpp"

namespace gdsr {

/// Locked conv feature stack. Weights are generated deterministically
/// from the seed at construction (or supplied externally via the
/// checkpoint container) and never change afterwards. channels[0] is the
/// input channel count; channels.size() == 1 means "identity extractor"
/// (tap = the input itself). Layers are bias-free 3x3 circular convs
/// with tanh.
struct FeatureExtractorSpec {
    std::vector<int> channels = {1, 8, 16, 16};
    int kernel_size = 3;
    uint64_t seed = 7;
    int tap_layer = -1;  // -1 = deepest conv layer
};

class FeatureExtractor {
public:
    explicit FeatureExtractor(const FeatureExtractorSpec& spec);

    const FeatureExtractorSpec& spec() const { return spec_; }
    int num_layers() const { return static_cast<int>(kernels_.size()); }
    int tap_layer() const { return tap_; }
    const std::vector<ConvKernel>& kernels() const { return kernels_; }
    /// External weight injection (checkpoint loading); geometry must match.
    void set_kernels(std::vector<ConvKernel> kernels);

    /// Tap-layer activation, one grid per channel.
    std::vector<ImageGrid> forward(const ImageGrid& x) const;
    /// Pull a per-channel cotangent at the tap layer back to the input.
    ImageGrid backward(const ImageGrid& x,
                       const std::vector<ImageGrid>& cotangent) const;

private:
    void forward_impl(const ImageGrid& x, std::vector<Tensor3>& acts) const;

    FeatureExtractorSpec spec_;
    std::vector<ConvKernel> kernels_;
    int tap_ = 0;
};

/// Differentiable intensity softmax over k class centers: channel c at
/// pixel p is softmax_c(-(x_p - center_c)^2 / temperature). Inputs are
/// clamped to [0,1] first (pixels outside get zero gradient).
struct SoftSegmenter {
    std::vector<double> centers;
    double temperature = 0.05;

    /// k centers at the midpoints of k equal bins of [0,1].
    static SoftSegmenter uniform(int k, double temperature = 0.05);
};

std::vector<ImageGrid> soft_segment(const ImageGrid& x, const SoftSegmenter& seg);
/// Pull per-channel mask cotangents back to the input.
ImageGrid soft_segment_backward(const ImageGrid& x, const SoftSegmenter& seg,
                                const std::vector<ImageGrid>& cotangent);

/// MSE between feature bundles plus MSE between mask bundles, both means
/// over every channel entry, summed unweighted.
double perceptual_loss(const ImageGrid& hr, const ImageGrid& sr,
                       const FeatureExtractor& fe, const SoftSegmenter& seg);

/// Exact gradient of perceptual_loss w.r.t. sr.
ImageGrid perceptual_loss_grad(const ImageGrid& hr, const ImageGrid& sr,
                               const FeatureExtractor& fe, const SoftSegmenter& seg);

}  // namespace gdsr
