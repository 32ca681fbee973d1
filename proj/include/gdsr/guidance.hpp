#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gdsr/denoiser.hpp"
#include "gdsr/grid.hpp"
#include "gdsr/schedule.hpp"

namespace gdsr {

class DegradationModel;

/// One named prior: a loss over the predicted clean image and its exact
/// gradient. The observation g and forward operator M live inside the
/// closures; gradient(x) must match finite differences of loss at x.
struct GuidanceTerm {
    std::string name;
    double rho = 0.0;
    std::function<double(const ImageGrid& x0_hat)> loss;
    std::function<ImageGrid(const ImageGrid& x0_hat)> gradient;
};

enum class JacobianMode {
    ThroughDenoiser,  // full chain rule through d(eps)/d(x_t)
    X0Detached,       // treat eps as constant; scalar 1/sqrt(alpha_bar)
};

enum class RhoDecay {
    Constant,
    SqrtOneMinusAlphaBar,  // effective rho_t = rho * sqrt(1 - alpha_bar_t)
};

struct GuidancePolicy {
    int t_start = 0;  // 0 means "schedule T" (resolved by the sampler)
    int t_end = 1;
    double clip_threshold = 1.0;  // gradient RMS clip; <= 0 disables
    JacobianMode jacobian_mode = JacobianMode::ThroughDenoiser;
    RhoDecay rho_decay = RhoDecay::Constant;

    bool active_at(int t, int T) const {
        int start = t_start > 0 ? t_start : T;
        return t >= t_end && t <= start;
    }
};

/// score = -eps / sqrt(1 - alpha_bar_t)
ImageGrid noise_to_score(const ImageGrid& eps, int t, const NoiseSchedule& sched);
/// eps = -sqrt(1 - alpha_bar_t) * score
ImageGrid score_to_noise(const ImageGrid& score, int t, const NoiseSchedule& sched);

/// Gradient of term.loss(x0_hat(x_t)) with respect to x_t. The clean
/// image estimate comes from the supplied eps; the cotangent at x0_hat
/// is pulled back either through the full denoiser Jacobian or by the
/// detached 1/sqrt(alpha_bar) scalar.
ImageGrid guidance_grad_xt(const GuidanceTerm& term, const ImageGrid& x_t,
                           const ImageGrid& eps, int t, const DenoiserModel& model,
                           const GuidancePolicy& policy, const NoiseSchedule& sched,
                           const ImageGrid* cond = nullptr);

/// eps' = eps + sqrt(1 - alpha_bar_t) * sum_i rho_i * clip(grad_i).
/// Clipping rescales any gradient whose RMS exceeds the policy threshold
/// down to the threshold. An empty/all-zero-rho list returns eps bitwise.
ImageGrid adjust_noise(const ImageGrid& eps,
                       const std::vector<std::pair<double, ImageGrid>>& grads,
                       int t, const NoiseSchedule& sched,
                       const GuidancePolicy& policy);

/// RMS clip used by adjust_noise, exposed for diagnostics.
ImageGrid clip_gradient(const ImageGrid& grad, double threshold);

/// Data-fidelity prior: g = lr, M = degradation; loss is the plain sum
/// of squared residuals and the gradient goes through the exact adjoint.
GuidanceTerm make_data_fidelity_term(const ImageGrid& lr,
                                     const DegradationModel& degrade_model,
                                     double rho);

/// Identity-operator prior toward a known target (verification aid).
GuidanceTerm make_identity_term(const ImageGrid& target, double rho,
                                const std::string& name = "identity");

}  // namespace gdsr
