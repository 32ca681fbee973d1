#include "gdsr/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "gdsr/denoiser.hpp"

namespace gdsr {

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
    if (betas.empty()) throw std::invalid_argument("invalid range: T must be >= 1");
    for (double b : betas)
        if (!(b >= 0.0 && b < 1.0))
            throw std::invalid_argument("invalid range: betas must lie in [0, 1)");
    NoiseSchedule s;
    s.betas_ = std::move(betas);
    s.alpha_bar_.resize(s.betas_.size() + 1);
    s.alpha_bar_[0] = 1.0;
    for (size_t t = 1; t <= s.betas_.size(); ++t)
        s.alpha_bar_[t] = s.alpha_bar_[t - 1] * (1.0 - s.betas_[t - 1]);
    return s;
}

double NoiseSchedule::beta(int t) const {
    if (t < 1 || t > T()) throw std::out_of_range("step out of range");
    return betas_[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > T()) throw std::out_of_range("step out of range");
    return alpha_bar_[t];
}

NoiseSchedule build_schedule(ScheduleKind kind, int T, double beta_min,
                             double beta_max) {
    if (T < 1) throw std::invalid_argument("invalid range: T must be >= 1");
    if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
        throw std::invalid_argument("invalid range: need 0 < beta_min <= beta_max < 1");

    std::vector<double> betas(T);
    if (kind == ScheduleKind::Linear) {
        if (T == 1) {
            betas[0] = beta_min;
        } else {
            for (int t = 0; t < T; ++t)
                betas[t] = beta_min + (beta_max - beta_min) * t / (T - 1);
        }
    } else {
        // squared-cosine alpha_bar curve (offset 0.008), betas clipped to (0, 0.999)
        auto curve = [](double u) {
            double a = std::cos((u + 0.008) / 1.008 * std::numbers::pi / 2.0);
            return a * a;
        };
        double prev = 1.0;
        for (int t = 1; t <= T; ++t) {
            double cur = curve(static_cast<double>(t) / T) / curve(0.0);
            double b = 1.0 - cur / prev;
            b = std::min(std::max(b, 1e-12), 0.999);
            betas[t - 1] = b;
            prev *= 1.0 - b;
        }
    }
    return NoiseSchedule::from_betas(std::move(betas));
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::Linear;
    if (s == "cosine") return ScheduleKind::Cosine;
    throw std::invalid_argument("invalid range: unknown schedule kind '" + s + "'");
}

ImageGrid forward_diffuse(const ImageGrid& x0, int t, const ImageGrid& eps,
                          const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T()) throw std::out_of_range("step out of range");
    require_same_shape(x0, eps);
    const double ab = sched.alpha_bar(t);
    const double ca = std::sqrt(ab), cb = std::sqrt(1.0 - ab);
    ImageGrid out(x0.height(), x0.width());
    for (size_t i = 0; i < out.size(); ++i) out[i] = ca * x0[i] + cb * eps[i];
    return out;
}

double simple_loss(const DenoiserModel& model, const ImageGrid& x0, int t,
                   const ImageGrid& eps, const ImageGrid* cond,
                   const NoiseSchedule& sched) {
    ImageGrid x_t = forward_diffuse(x0, t, eps, sched);
    ImageGrid pred = model.predict_eps(x_t, t, cond, sched);
    return l2_norm_sq(pred, eps) / static_cast<double>(eps.size());
}

}  // namespace gdsr
