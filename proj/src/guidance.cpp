#include "gdsr/guidance.hpp"

#include <cmath>
#include <stdexcept>

#include "gdsr/degrade.hpp"

namespace gdsr {

ImageGrid noise_to_score(const ImageGrid& eps, int t, const NoiseSchedule& sched) {
    const double om = 1.0 - sched.alpha_bar(t);
    if (om < 1e-12) throw std::domain_error("degenerate step");
    return scale(eps, -1.0 / std::sqrt(om));
}

ImageGrid score_to_noise(const ImageGrid& score, int t, const NoiseSchedule& sched) {
    const double om = 1.0 - sched.alpha_bar(t);
    if (om < 1e-12) throw std::domain_error("degenerate step");
    return scale(score, -std::sqrt(om));
}

ImageGrid guidance_grad_xt(const GuidanceTerm& term, const ImageGrid& x_t,
                           const ImageGrid& eps, int t, const DenoiserModel& model,
                           const GuidancePolicy& policy, const NoiseSchedule& sched,
                           const ImageGrid* cond) {
    const ImageGrid x0_hat = predict_x0(x_t, eps, t, sched);
    const ImageGrid cot = term.gradient(x0_hat);  // dL/d(x0_hat)
    const double ab = sched.alpha_bar(t);
    const double inv_sqrt_ab = 1.0 / std::sqrt(ab);
    if (policy.jacobian_mode == JacobianMode::X0Detached)
        return scale(cot, inv_sqrt_ab);
    // d(x0_hat)/d(x_t) = (I - sqrt(1-ab) * d(eps)/d(x_t)) / sqrt(ab)
    const ImageGrid vjp = model.eps_jacobian_vjp(x_t, t, cond, sched, cot);
    const double cb = std::sqrt(1.0 - ab);
    ImageGrid out(x_t.height(), x_t.width());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = (cot[i] - cb * vjp[i]) * inv_sqrt_ab;
    return out;
}

ImageGrid clip_gradient(const ImageGrid& grad, double threshold) {
    if (threshold <= 0.0) return grad;
    const double r = rms(grad);
    if (r <= threshold) return grad;
    return scale(grad, threshold / r);
}

ImageGrid adjust_noise(const ImageGrid& eps,
                       const std::vector<std::pair<double, ImageGrid>>& grads,
                       int t, const NoiseSchedule& sched,
                       const GuidancePolicy& policy) {
    bool any = false;
    for (const auto& [rho, g] : grads)
        if (rho != 0.0) any = true;
    if (!any) return eps;  // bitwise no-op when nothing contributes

    const double cb = std::sqrt(1.0 - sched.alpha_bar(t));
    ImageGrid out = eps;
    for (const auto& [rho, g] : grads) {
        if (rho == 0.0) continue;
        require_same_shape(eps, g);
        const ImageGrid clipped = clip_gradient(g, policy.clip_threshold);
        double r = rho;
        if (policy.rho_decay == RhoDecay::SqrtOneMinusAlphaBar) r *= cb;
        for (size_t i = 0; i < out.size(); ++i) out[i] += cb * r * clipped[i];
    }
    return out;
}

GuidanceTerm make_data_fidelity_term(const ImageGrid& lr,
                                     const DegradationModel& degrade_model,
                                     double rho) {
    if (rho < 0.0) throw std::invalid_argument("invalid range: rho must be >= 0");
    GuidanceTerm term;
    term.name = "data_fidelity";
    term.rho = rho;
    // copies keep the term self-contained and shareable across chains
    term.loss = [lr, degrade_model](const ImageGrid& x0_hat) {
        ImageGrid down = degrade(x0_hat, degrade_model);
        require_same_shape(lr, down);
        return l2_norm_sq(lr, down);
    };
    term.gradient = [lr, degrade_model](const ImageGrid& x0_hat) {
        ImageGrid down = degrade(x0_hat, degrade_model);
        require_same_shape(lr, down);
        // d/dx ||lr - D x||^2 = 2 D^T (D x - lr)
        ImageGrid residual = sub(down, lr);
        return scale(degrade_adjoint(residual, degrade_model), 2.0);
    };
    return term;
}

GuidanceTerm make_identity_term(const ImageGrid& target, double rho,
                                const std::string& name) {
    GuidanceTerm term;
    term.name = name;
    term.rho = rho;
    term.loss = [target](const ImageGrid& x0_hat) {
        return l2_norm_sq(target, x0_hat);
    };
    term.gradient = [target](const ImageGrid& x0_hat) {
        return scale(sub(x0_hat, target), 2.0);
    };
    return term;
}

}  // namespace gdsr
