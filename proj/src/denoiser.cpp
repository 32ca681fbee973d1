#include "gdsr/denoiser.hpp"

#include <cmath>
#include <stdexcept>

#include "gdsr/rng.hpp"

namespace gdsr {

ImageGrid predict_x0(const ImageGrid& x_t, const ImageGrid& eps, int t,
                     const NoiseSchedule& sched) {
    require_same_shape(x_t, eps);
    const double ab = sched.alpha_bar(t);
    if (ab < 1e-12) throw std::domain_error("degenerate alpha");
    const double inv = 1.0 / std::sqrt(ab), cb = std::sqrt(1.0 - ab);
    ImageGrid out(x_t.height(), x_t.width());
    for (size_t i = 0; i < out.size(); ++i) out[i] = (x_t[i] - cb * eps[i]) * inv;
    return out;
}

// ---------------------------------------------------------------- analytic

AnalyticGaussianDenoiser::AnalyticGaussianDenoiser(AnalyticGaussianParams params)
    : params_(std::move(params)) {
    if (params_.sigma2 < 0.0)
        throw std::invalid_argument("invalid range: sigma2 must be >= 0");
    if (!params_.mu.all_finite())
        throw std::invalid_argument("invalid range: mu must be finite");
}

ImageGrid AnalyticGaussianDenoiser::predict_eps(const ImageGrid& x_t, int t,
                                                const ImageGrid* /*cond*/,
                                                const NoiseSchedule& sched) const {
    require_same_shape(x_t, params_.mu);
    const double ab = sched.alpha_bar(t);
    const double denom = ab * params_.sigma2 + 1.0 - ab;
    const double c = std::sqrt(1.0 - ab) / denom, cm = std::sqrt(ab);
    ImageGrid out(x_t.height(), x_t.width());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = c * (x_t[i] - cm * params_.mu[i]);
    return out;
}

double AnalyticGaussianDenoiser::jacobian_scalar(int t,
                                                 const NoiseSchedule& sched) const {
    const double ab = sched.alpha_bar(t);
    return std::sqrt(1.0 - ab) / (ab * params_.sigma2 + 1.0 - ab);
}

ImageGrid AnalyticGaussianDenoiser::eps_jacobian_vjp(
    const ImageGrid& x_t, int t, const ImageGrid* /*cond*/,
    const NoiseSchedule& sched, const ImageGrid& cotangent) const {
    require_same_shape(x_t, cotangent);
    return scale(cotangent, jacobian_scalar(t, sched));
}

// ---------------------------------------------------------------- conv net

ConvDenoiser::ConvDenoiser(const ConvDenoiserArch& arch, uint64_t init_seed)
    : arch_(arch) {
    if (arch_.num_hidden_layers < 0 || arch_.num_hidden_layers + 2 > 6)
        throw std::invalid_argument("invalid range: total conv depth must be <= 6");
    if (arch_.time_embed_dim % 2 != 0 || arch_.time_embed_dim <= 0)
        throw std::invalid_argument("invalid range: time_embed_dim must be positive even");
    const int in_ch = arch_.conditioned ? 2 : 1;
    const int C = arch_.hidden_channels, K = arch_.kernel_size;
    Rng rng(init_seed);
    kernels_.emplace_back(C, in_ch, K, true);
    for (int i = 0; i < arch_.num_hidden_layers; ++i)
        kernels_.emplace_back(C, C, K, true);
    kernels_.emplace_back(1, C, K, true);
    for (auto& k : kernels_) k.init_uniform_fan_in(rng);
    time_w_.resize(static_cast<size_t>(C) * arch_.time_embed_dim);
    time_b_.assign(C, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(arch_.time_embed_dim));
    for (double& v : time_w_) v = rng.uniform(-bound, bound);
    skip_w_.assign(static_cast<size_t>(in_ch) * arch_.time_embed_dim, 0.0);
    skip_b_.assign(in_ch, 0.0);
}

double ConvDenoiser::skip_gain(int c, int t) const {
    const int E = arch_.time_embed_dim;
    const std::vector<double> emb = time_embedding(t);
    double g = skip_b_[c];
    for (int e = 0; e < E; ++e) g += skip_w_[static_cast<size_t>(c) * E + e] * emb[e];
    return g;
}

std::vector<double> ConvDenoiser::time_embedding(int t) const {
    const int E = arch_.time_embed_dim, half = E / 2;
    std::vector<double> emb(E);
    for (int j = 0; j < half; ++j) {
        double freq = std::exp(-std::log(10000.0) * j / half);
        emb[2 * j] = std::sin(t * freq);
        emb[2 * j + 1] = std::cos(t * freq);
    }
    return emb;
}

Tensor3 ConvDenoiser::assemble_input(const ImageGrid& x_t,
                                     const ImageGrid* cond) const {
    if (arch_.conditioned) {
        if (cond == nullptr) throw std::invalid_argument("missing condition");
        require_same_shape(x_t, *cond);
        Tensor3 in(2, x_t.height(), x_t.width());
        std::copy(x_t.data().begin(), x_t.data().end(), in.plane(0));
        std::copy(cond->data().begin(), cond->data().end(), in.plane(1));
        return in;
    }
    return tensor_from_grid(x_t);
}

// acts layout: [0] input, then per conv layer the post-activation output
// (post-temb tanh for layer 0, tanh for hidden, linear for the last).
void ConvDenoiser::forward_impl(const Tensor3& input, int t,
                                std::vector<Tensor3>& acts) const {
    const int H = input.height, W = input.width;
    const int C = arch_.hidden_channels, E = arch_.time_embed_dim;
    acts.clear();
    acts.push_back(input);

    Tensor3 z(C, H, W);
    conv_forward(kernels_[0], input, z);
    const std::vector<double> emb = time_embedding(t);
    for (int c = 0; c < C; ++c) {
        double tv = time_b_[c];
        for (int e = 0; e < E; ++e) tv += time_w_[static_cast<size_t>(c) * E + e] * emb[e];
        double* p = z.plane(c);
        for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) p[i] += tv;
    }
    Tensor3 h;
    tanh_forward(z, h);
    acts.push_back(h);

    for (int l = 0; l < arch_.num_hidden_layers; ++l) {
        Tensor3 z2(C, H, W);
        conv_forward(kernels_[1 + l], acts.back(), z2);
        Tensor3 h2;
        tanh_forward(z2, h2);
        acts.push_back(std::move(h2));
    }

    Tensor3 out(1, H, W);
    conv_forward(kernels_.back(), acts.back(), out);
    for (int c = 0; c < input.channels; ++c) {
        const double g = skip_gain(c, t);
        const double* in_c = input.plane(c);
        double* o = out.plane(0);
        for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) o[i] += g * in_c[i];
    }
    acts.push_back(std::move(out));
}

ImageGrid ConvDenoiser::predict_eps(const ImageGrid& x_t, int t,
                                    const ImageGrid* cond,
                                    const NoiseSchedule& sched) const {
    if (t < 1 || t > sched.T()) throw std::out_of_range("step out of range");
    std::vector<Tensor3> acts;
    forward_impl(assemble_input(x_t, cond), t, acts);
    return grid_from_plane(acts.back(), 0);
}

ConvDenoiser::Gradients ConvDenoiser::zero_gradients() const {
    Gradients g;
    for (const auto& k : kernels_)
        g.kernels.emplace_back(k.out_ch, k.in_ch, k.ksize, !k.b.empty());
    g.time_w.assign(time_w_.size(), 0.0);
    g.time_b.assign(time_b_.size(), 0.0);
    g.skip_w.assign(skip_w_.size(), 0.0);
    g.skip_b.assign(skip_b_.size(), 0.0);
    return g;
}

ImageGrid ConvDenoiser::forward_backward(const ImageGrid& x_t, int t,
                                         const ImageGrid* cond,
                                         const ImageGrid& cotangent,
                                         Gradients* param_grads,
                                         ImageGrid* input_grad) const {
    std::vector<Tensor3> acts;
    forward_impl(assemble_input(x_t, cond), t, acts);

    const int H = x_t.height(), W = x_t.width();
    const size_t last = kernels_.size() - 1;

    Tensor3 d = tensor_from_grid(cotangent);  // d(loss)/d(output)
    if (param_grads) {
        const std::vector<double> emb = time_embedding(t);
        const int E = arch_.time_embed_dim;
        for (int c = 0; c < acts[0].channels; ++c) {
            double s = 0.0;
            const double* in_c = acts[0].plane(c);
            const double* co = d.plane(0);
            for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) s += co[i] * in_c[i];
            param_grads->skip_b[c] += s;
            for (int e = 0; e < E; ++e)
                param_grads->skip_w[static_cast<size_t>(c) * E + e] += s * emb[e];
        }
    }
    // output conv
    {
        const Tensor3& hin = acts[last];  // input activation of the out conv
        if (param_grads)
            conv_backward_weights(kernels_[last], hin, d, param_grads->kernels[last]);
        Tensor3 dh(hin.channels, H, W);
        conv_backward_input(kernels_[last], d, dh);
        d = std::move(dh);
    }
    // hidden convs, in reverse
    for (int l = arch_.num_hidden_layers - 1; l >= 0; --l) {
        const Tensor3& hout = acts[2 + l];
        const Tensor3& hin = acts[1 + l];
        Tensor3 dz;
        tanh_backward(hout, d, dz);
        if (param_grads)
            conv_backward_weights(kernels_[1 + l], hin, dz, param_grads->kernels[1 + l]);
        Tensor3 dh(hin.channels, H, W);
        conv_backward_input(kernels_[1 + l], dz, dh);
        d = std::move(dh);
    }
    // input conv + time embedding
    {
        Tensor3 dz;
        tanh_backward(acts[1], d, dz);
        if (param_grads) {
            const std::vector<double> emb = time_embedding(t);
            const int C = arch_.hidden_channels, E = arch_.time_embed_dim;
            for (int c = 0; c < C; ++c) {
                const double* p = dz.plane(c);
                double s = 0.0;
                for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) s += p[i];
                param_grads->time_b[c] += s;
                for (int e = 0; e < E; ++e)
                    param_grads->time_w[static_cast<size_t>(c) * E + e] += s * emb[e];
            }
            conv_backward_weights(kernels_[0], acts[0], dz, param_grads->kernels[0]);
        }
        if (input_grad) {
            Tensor3 din(acts[0].channels, H, W);
            conv_backward_input(kernels_[0], dz, din);
            *input_grad = grid_from_plane(din, 0);  // x_t channel only
            // skip path contributes directly from the output cotangent
            const double g0 = skip_gain(0, t);
            for (size_t i = 0; i < input_grad->size(); ++i)
                (*input_grad)[i] += g0 * cotangent[i];
        }
    }
    return grid_from_plane(acts.back(), 0);
}

ImageGrid ConvDenoiser::eps_jacobian_vjp(const ImageGrid& x_t, int t,
                                         const ImageGrid* cond,
                                         const NoiseSchedule& sched,
                                         const ImageGrid& cotangent) const {
    if (t < 1 || t > sched.T()) throw std::out_of_range("step out of range");
    require_same_shape(x_t, cotangent);
    ImageGrid grad(x_t.height(), x_t.width());
    forward_backward(x_t, t, cond, cotangent, nullptr, &grad);
    return grad;
}

// ---------------------------------------------------------------- training

std::vector<double> train_denoiser(ConvDenoiser& model,
                                   const std::vector<TrainSample>& dataset,
                                   const NoiseSchedule& sched,
                                   const TrainConfig& cfg) {
    if (dataset.empty())
        throw std::invalid_argument("invalid range: dataset must be nonempty");
    if (cfg.iterations < 0)
        throw std::invalid_argument("invalid range: iterations must be >= 0");
    std::vector<double> trace;
    if (cfg.iterations == 0) return trace;
    trace.reserve(cfg.iterations);

    Rng rng(cfg.seed);
    auto velocity = model.zero_gradients();

    for (int it = 0; it < cfg.iterations; ++it) {
        const TrainSample& sample = dataset[rng.uniform_index(dataset.size())];
        const int t = 1 + static_cast<int>(rng.uniform_index(sched.T()));
        const ImageGrid eps = rng.normal_grid(sample.hr.height(), sample.hr.width());
        const ImageGrid x_t = forward_diffuse(sample.hr, t, eps, sched);
        const ImageGrid* cond =
            sample.cond.has_value() ? &sample.cond.value() : nullptr;
        if (model.arch().conditioned && cond == nullptr)
            throw std::invalid_argument("missing condition");

        const double n = static_cast<double>(eps.size());
        const double ab = sched.alpha_bar(t);

        // first forward to form the cotangent, then one fused pass
        ImageGrid pred = model.predict_eps(x_t, t, cond, sched);
        double loss = l2_norm_sq(pred, eps) / n;
        ImageGrid cot(pred.height(), pred.width());
        for (size_t i = 0; i < cot.size(); ++i)
            cot[i] = 2.0 * (pred[i] - eps[i]) / n;

        if (cfg.aux_loss) {
            // x0_hat = (x_t - sqrt(1-ab) * pred) / sqrt(ab)
            ImageGrid x0_hat = predict_x0(x_t, pred, t, sched);
            auto [aux, daux_dx0] = cfg.aux_loss(sample.hr, x0_hat);
            loss += cfg.aux_weight * aux;
            const double chain = -std::sqrt(1.0 - ab) / std::sqrt(ab);
            for (size_t i = 0; i < cot.size(); ++i)
                cot[i] += cfg.aux_weight * chain * daux_dx0[i];
        }
        if (!std::isfinite(loss)) throw std::runtime_error("divergence");
        trace.push_back(loss);

        auto grads = model.zero_gradients();
        model.forward_backward(x_t, t, cond, cot, &grads, nullptr);

        // SGD with momentum
        const double lr = cfg.learning_rate, mom = cfg.momentum;
        for (size_t k = 0; k < grads.kernels.size(); ++k) {
            auto& vw = velocity.kernels[k].w;
            auto& vb = velocity.kernels[k].b;
            auto& gw = grads.kernels[k].w;
            auto& gb = grads.kernels[k].b;
            auto& w = model.kernels()[k].w;
            auto& b = model.kernels()[k].b;
            for (size_t i = 0; i < w.size(); ++i) {
                vw[i] = mom * vw[i] + gw[i];
                w[i] -= lr * vw[i];
            }
            for (size_t i = 0; i < b.size(); ++i) {
                vb[i] = mom * vb[i] + gb[i];
                b[i] -= lr * vb[i];
            }
        }
        for (size_t i = 0; i < model.time_weight().size(); ++i) {
            velocity.time_w[i] = mom * velocity.time_w[i] + grads.time_w[i];
            model.time_weight()[i] -= lr * velocity.time_w[i];
        }
        for (size_t i = 0; i < model.time_bias().size(); ++i) {
            velocity.time_b[i] = mom * velocity.time_b[i] + grads.time_b[i];
            model.time_bias()[i] -= lr * velocity.time_b[i];
        }
        for (size_t i = 0; i < model.skip_weight().size(); ++i) {
            velocity.skip_w[i] = mom * velocity.skip_w[i] + grads.skip_w[i];
            model.skip_weight()[i] -= lr * velocity.skip_w[i];
        }
        for (size_t i = 0; i < model.skip_bias().size(); ++i) {
            velocity.skip_b[i] = mom * velocity.skip_b[i] + grads.skip_b[i];
            model.skip_bias()[i] -= lr * velocity.skip_b[i];
        }
    }
    return trace;
}

}  // namespace gdsr
