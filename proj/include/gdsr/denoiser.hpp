#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "gdsr/conv_ops.hpp"
#include "gdsr/grid.hpp"
#include "gdsr/schedule.hpp"

namespace gdsr {

/// Noise-prediction backend contract. Evaluation is deterministic in
/// (x_t, t, cond) and safe to share read-only across chains; all backends
/// expose the vector-Jacobian product of the prediction w.r.t. x_t.
class DenoiserModel {
public:
    virtual ~DenoiserModel() = default;

    virtual ImageGrid predict_eps(const ImageGrid& x_t, int t,
                                  const ImageGrid* cond,
                                  const NoiseSchedule& sched) const = 0;

    /// Returns J^T * cotangent with J = d(predict_eps)/d(x_t).
    virtual ImageGrid eps_jacobian_vjp(const ImageGrid& x_t, int t,
                                       const ImageGrid* cond,
                                       const NoiseSchedule& sched,
                                       const ImageGrid& cotangent) const = 0;
};

/// (x_t - sqrt(1 - alpha_bar_t) * eps) / sqrt(alpha_bar_t)
ImageGrid predict_x0(const ImageGrid& x_t, const ImageGrid& eps, int t,
                     const NoiseSchedule& sched);

/// Exact oracle for Gaussian data N(mu, sigma2 * I): the score of the
/// diffused marginal is available in closed form, so the optimal noise
/// prediction is
///   sqrt(1 - ab) * (x_t - sqrt(ab) * mu) / (ab * sigma2 + 1 - ab).
struct AnalyticGaussianParams {
    ImageGrid mu;
    double sigma2 = 1.0;
};

class AnalyticGaussianDenoiser : public DenoiserModel {
public:
    explicit AnalyticGaussianDenoiser(AnalyticGaussianParams params);

    ImageGrid predict_eps(const ImageGrid& x_t, int t, const ImageGrid* cond,
                          const NoiseSchedule& sched) const override;
    ImageGrid eps_jacobian_vjp(const ImageGrid& x_t, int t, const ImageGrid* cond,
                               const NoiseSchedule& sched,
                               const ImageGrid& cotangent) const override;

    /// d(eps)/d(x_t) is this scalar times the identity.
    double jacobian_scalar(int t, const NoiseSchedule& sched) const;
    const AnalyticGaussianParams& params() const { return params_; }

private:
    AnalyticGaussianParams params_;
};

/// Small conditioned conv net: conv-in (+ per-channel timestep embedding,
/// tanh), hidden 3x3 tanh convs, linear conv-out. Conditioning, when
/// enabled, is an extra input channel carrying the upsampled LR image.
struct ConvDenoiserArch {
    int hidden_channels = 16;
    int num_hidden_layers = 1;  // convs between in and out; total convs <= 6
    int kernel_size = 3;
    int time_embed_dim = 16;    // even
    bool conditioned = false;
};

class ConvDenoiser : public DenoiserModel {
public:
    ConvDenoiser(const ConvDenoiserArch& arch, uint64_t init_seed);

    ImageGrid predict_eps(const ImageGrid& x_t, int t, const ImageGrid* cond,
                          const NoiseSchedule& sched) const override;
    ImageGrid eps_jacobian_vjp(const ImageGrid& x_t, int t, const ImageGrid* cond,
                               const NoiseSchedule& sched,
                               const ImageGrid& cotangent) const override;

    const ConvDenoiserArch& arch() const { return arch_; }

    // parameter access (training, checkpoints)
    std::vector<ConvKernel>& kernels() { return kernels_; }
    const std::vector<ConvKernel>& kernels() const { return kernels_; }
    std::vector<double>& time_weight() { return time_w_; }
    const std::vector<double>& time_weight() const { return time_w_; }
    std::vector<double>& time_bias() { return time_b_; }
    const std::vector<double>& time_bias() const { return time_b_; }
    /// Linear skip from each input channel to the output with a gain
    /// that is itself a learned affine function of the time embedding.
    /// The optimal noise prediction is nearly affine in (x_t, cond) with
    /// strongly t-dependent coefficients, so the conv stack only has to
    /// learn the residual detail.
    std::vector<double>& skip_weight() { return skip_w_; }  // [in_ch][embed]
    const std::vector<double>& skip_weight() const { return skip_w_; }
    std::vector<double>& skip_bias() { return skip_b_; }  // [in_ch]
    const std::vector<double>& skip_bias() const { return skip_b_; }
    /// Resolved skip gain of input channel c at step t.
    double skip_gain(int c, int t) const;

    std::vector<double> time_embedding(int t) const;

    struct Gradients {
        std::vector<ConvKernel> kernels;
        std::vector<double> time_w;
        std::vector<double> time_b;
        std::vector<double> skip_w;
        std::vector<double> skip_b;
    };
    Gradients zero_gradients() const;

    /// Forward pass plus one reverse sweep. Returns the prediction;
    /// accumulates parameter gradients into *param_grads (if non-null)
    /// and writes the x_t-channel input gradient into *input_grad (if
    /// non-null). Cotangent is d(loss)/d(prediction).
    ImageGrid forward_backward(const ImageGrid& x_t, int t, const ImageGrid* cond,
                               const ImageGrid& cotangent,
                               Gradients* param_grads, ImageGrid* input_grad) const;

private:
    Tensor3 assemble_input(const ImageGrid& x_t, const ImageGrid* cond) const;
    void forward_impl(const Tensor3& input, int t,
                      std::vector<Tensor3>& acts) const;

    ConvDenoiserArch arch_;
    std::vector<ConvKernel> kernels_;  // [in, hidden..., out]
    std::vector<double> time_w_;       // [hidden_channels][time_embed_dim]
    std::vector<double> time_b_;       // [hidden_channels]
    std::vector<double> skip_w_;       // [in_ch][time_embed_dim]
    std::vector<double> skip_b_;       // [in_ch]
};

/// One (HR target, conditioning) training pair; cond is the upsampled LR
/// raster for conditioned models, absent otherwise.
struct TrainSample {
    ImageGrid hr;
    std::optional<ImageGrid> cond;
};

struct TrainConfig {
    int iterations = 0;
    double learning_rate = 1e-2;
    double momentum = 0.9;
    uint64_t seed = 0;
    /// Optional loss on the predicted x0 (value, gradient w.r.t. x0_hat);
    /// backpropagated into the weights when set. Used by the
    /// loss-in-training injection mode.
    std::function<std::pair<double, ImageGrid>(const ImageGrid& hr,
                                               const ImageGrid& x0_hat)>
        aux_loss;
    double aux_weight = 1.0;
};

/// SGD with momentum on the pixel-mean simple loss, t drawn uniformly
/// from {1..T}. Returns the per-iteration loss trace; throws
/// "divergence" if the loss goes non-finite.
std::vector<double> train_denoiser(ConvDenoiser& model,
                                   const std::vector<TrainSample>& dataset,
                                   const NoiseSchedule& sched,
                                   const TrainConfig& cfg);

}  // namespace gdsr
