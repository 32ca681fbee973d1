#include "gdsr/perceptual.hpp"

#include <cmath>
#include <stdexcept>

#include "gdsr/rng.hpp"

namespace gdsr {

FeatureExtractor::FeatureExtractor(const FeatureExtractorSpec& spec) : spec_(spec) {
    if (spec_.channels.empty() || spec_.channels[0] != 1)
        throw std::invalid_argument("incompatible shape: channels must start at 1");
    Rng rng(spec_.seed);
    for (size_t l = 0; l + 1 < spec_.channels.size(); ++l) {
        kernels_.emplace_back(spec_.channels[l + 1], spec_.channels[l],
                              spec_.kernel_size, /*bias=*/false);
        kernels_.back().init_uniform_fan_in(rng);
    }
    tap_ = spec_.tap_layer < 0 ? static_cast<int>(kernels_.size()) : spec_.tap_layer;
    if (tap_ < 0 || tap_ > static_cast<int>(kernels_.size()))
        throw std::invalid_argument("incompatible shape: tap layer out of range");
}

void FeatureExtractor::set_kernels(std::vector<ConvKernel> kernels) {
    if (kernels.size() != kernels_.size())
        throw std::invalid_argument("incompatible shape: layer count mismatch");
    for (size_t i = 0; i < kernels.size(); ++i)
        if (kernels[i].out_ch != kernels_[i].out_ch ||
            kernels[i].in_ch != kernels_[i].in_ch ||
            kernels[i].ksize != kernels_[i].ksize)
            throw std::invalid_argument("incompatible shape: kernel geometry mismatch");
    kernels_ = std::move(kernels);
}

// acts: [0] input (1 channel), then tanh output of each conv up to tap
void FeatureExtractor::forward_impl(const ImageGrid& x,
                                    std::vector<Tensor3>& acts) const {
    acts.clear();
    acts.push_back(tensor_from_grid(x));
    for (int l = 0; l < tap_; ++l) {
        const ConvKernel& k = kernels_[l];
        Tensor3 z(k.out_ch, x.height(), x.width());
        conv_forward(k, acts.back(), z);
        Tensor3 h;
        tanh_forward(z, h);
        acts.push_back(std::move(h));
    }
}

std::vector<ImageGrid> FeatureExtractor::forward(const ImageGrid& x) const {
    std::vector<Tensor3> acts;
    forward_impl(x, acts);
    const Tensor3& tap = acts.back();
    std::vector<ImageGrid> bundle;
    bundle.reserve(tap.channels);
    for (int c = 0; c < tap.channels; ++c) bundle.push_back(grid_from_plane(tap, c));
    return bundle;
}

ImageGrid FeatureExtractor::backward(const ImageGrid& x,
                                     const std::vector<ImageGrid>& cotangent) const {
    std::vector<Tensor3> acts;
    forward_impl(x, acts);
    const Tensor3& tap = acts.back();
    if (static_cast<int>(cotangent.size()) != tap.channels)
        throw std::invalid_argument("incompatible shape: cotangent channel count");
    Tensor3 d(tap.channels, x.height(), x.width());
    for (int c = 0; c < tap.channels; ++c) {
        require_same_shape(cotangent[c], x);
        std::copy(cotangent[c].data().begin(), cotangent[c].data().end(), d.plane(c));
    }
    for (int l = tap_ - 1; l >= 0; --l) {
        Tensor3 dz;
        tanh_backward(acts[l + 1], d, dz);
        Tensor3 din(kernels_[l].in_ch, x.height(), x.width());
        conv_backward_input(kernels_[l], dz, din);
        d = std::move(din);
    }
    return grid_from_plane(d, 0);
}

SoftSegmenter SoftSegmenter::uniform(int k, double temperature) {
    if (k < 1) throw std::invalid_argument("invalid range: k must be >= 1");
    if (temperature <= 0.0)
        throw std::invalid_argument("invalid range: temperature must be > 0");
    SoftSegmenter seg;
    seg.temperature = temperature;
    for (int c = 0; c < k; ++c) seg.centers.push_back((c + 0.5) / k);
    return seg;
}

namespace {

void check_segmenter(const SoftSegmenter& seg) {
    if (seg.centers.empty())
        throw std::invalid_argument("invalid range: segmenter needs centers");
    if (seg.temperature <= 0.0)
        throw std::invalid_argument("invalid range: temperature must be > 0");
    for (size_t c = 1; c < seg.centers.size(); ++c)
        if (!(seg.centers[c] > seg.centers[c - 1]))
            throw std::invalid_argument("invalid range: centers must be increasing");
}

}  // namespace

std::vector<ImageGrid> soft_segment(const ImageGrid& x, const SoftSegmenter& seg) {
    check_segmenter(seg);
    const int k = static_cast<int>(seg.centers.size());
    std::vector<ImageGrid> masks(k, ImageGrid(x.height(), x.width()));
    std::vector<double> logits(k);
    for (size_t i = 0; i < x.size(); ++i) {
        const double v = std::clamp(x[i], 0.0, 1.0);
        double mx = -1e300;
        for (int c = 0; c < k; ++c) {
            const double d = v - seg.centers[c];
            logits[c] = -d * d / seg.temperature;
            mx = std::max(mx, logits[c]);
        }
        double z = 0.0;
        for (int c = 0; c < k; ++c) z += std::exp(logits[c] - mx);
        for (int c = 0; c < k; ++c) masks[c][i] = std::exp(logits[c] - mx) / z;
    }
    return masks;
}

ImageGrid soft_segment_backward(const ImageGrid& x, const SoftSegmenter& seg,
                                const std::vector<ImageGrid>& cotangent) {
    check_segmenter(seg);
    const int k = static_cast<int>(seg.centers.size());
    if (static_cast<int>(cotangent.size()) != k)
        throw std::invalid_argument("incompatible shape: cotangent channel count");
    std::vector<ImageGrid> masks = soft_segment(x, seg);
    ImageGrid grad(x.height(), x.width());
    std::vector<double> dlogit(k);
    for (size_t i = 0; i < x.size(); ++i) {
        const double raw = x[i];
        if (raw < 0.0 || raw > 1.0) {
            grad[i] = 0.0;  // clamp region: zero subgradient
            continue;
        }
        // softmax pullback per pixel: dz_c = y_c * (u_c - sum_c' u_c' y_c')
        double udoty = 0.0;
        for (int c = 0; c < k; ++c) udoty += cotangent[c][i] * masks[c][i];
        double acc = 0.0;
        for (int c = 0; c < k; ++c) {
            const double dz = masks[c][i] * (cotangent[c][i] - udoty);
            const double dlog_dx = -2.0 * (raw - seg.centers[c]) / seg.temperature;
            acc += dz * dlog_dx;
        }
        grad[i] = acc;
    }
    return grad;
}

namespace {

double bundle_mse(const std::vector<ImageGrid>& a, const std::vector<ImageGrid>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("shape mismatch");
    double s = 0.0;
    size_t n = 0;
    for (size_t c = 0; c < a.size(); ++c) {
        s += l2_norm_sq(a[c], b[c]);
        n += a[c].size();
    }
    return n == 0 ? 0.0 : s / static_cast<double>(n);
}

}  // namespace

double perceptual_loss(const ImageGrid& hr, const ImageGrid& sr,
                       const FeatureExtractor& fe, const SoftSegmenter& seg) {
    require_same_shape(hr, sr);
    const double feat = bundle_mse(fe.forward(hr), fe.forward(sr));
    const double mask = bundle_mse(soft_segment(hr, seg), soft_segment(sr, seg));
    return feat + mask;
}

ImageGrid perceptual_loss_grad(const ImageGrid& hr, const ImageGrid& sr,
                               const FeatureExtractor& fe, const SoftSegmenter& seg) {
    require_same_shape(hr, sr);

    std::vector<ImageGrid> fh = fe.forward(hr);
    std::vector<ImageGrid> fs = fe.forward(sr);
    if (fh.size() != fs.size()) throw std::invalid_argument("shape mismatch");
    size_t nf = 0;
    for (const auto& g : fs) nf += g.size();
    std::vector<ImageGrid> fcot;
    fcot.reserve(fs.size());
    for (size_t c = 0; c < fs.size(); ++c)
        fcot.push_back(scale(sub(fs[c], fh[c]), 2.0 / static_cast<double>(nf)));
    ImageGrid grad = fe.backward(sr, fcot);

    std::vector<ImageGrid> sh = soft_segment(hr, seg);
    std::vector<ImageGrid> ss = soft_segment(sr, seg);
    size_t nm = 0;
    for (const auto& g : ss) nm += g.size();
    std::vector<ImageGrid> mcot;
    mcot.reserve(ss.size());
    for (size_t c = 0; c < ss.size(); ++c)
        mcot.push_back(scale(sub(ss[c], sh[c]), 2.0 / static_cast<double>(nm)));
    return add(grad, soft_segment_backward(sr, seg, mcot));
}

}  // namespace gdsr
