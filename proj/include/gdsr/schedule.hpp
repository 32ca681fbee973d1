#pragma once

#include <string>
#include <vector>

#include "gdsr/grid.hpp"

namespace gdsr {

enum class ScheduleKind { Linear, Cosine };

/// Fixed variance schedule. Steps are 1-based, t in {1..T}; alpha_bar(0)
/// is defined as 1 for the sampler's terminal step. alpha_bar is always
/// the exact running product of (1 - beta), never a separate closed form.
class NoiseSchedule {
public:
    static NoiseSchedule from_betas(std::vector<double> betas);

    int T() const { return static_cast<int>(betas_.size()); }
    double beta(int t) const;        // t in [1, T]
    double alpha_bar(int t) const;   // t in [0, T], alpha_bar(0) == 1

    const std::vector<double>& betas() const { return betas_; }

private:
    std::vector<double> betas_;
    std::vector<double> alpha_bar_;  // alpha_bar_[t] for t in [0, T]
};

/// Linear: beta interpolated uniformly from beta_min to beta_max.
/// Cosine: beta derived from the squared-cosine alpha_bar curve, each
/// beta clipped into (0, 0.999).
NoiseSchedule build_schedule(ScheduleKind kind, int T, double beta_min,
                             double beta_max);
ScheduleKind schedule_kind_from_string(const std::string& s);

/// sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps
ImageGrid forward_diffuse(const ImageGrid& x0, int t, const ImageGrid& eps,
                          const NoiseSchedule& sched);

class DenoiserModel;

/// Mean over pixels of (eps_pred - eps)^2 at x_t = forward_diffuse(x0, t, eps).
double simple_loss(const DenoiserModel& model, const ImageGrid& x0, int t,
                   const ImageGrid& eps, const ImageGrid* cond,
                   const NoiseSchedule& sched);

}  // namespace gdsr
