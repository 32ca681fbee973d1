#pragma once

#include <optional>
#include <vector>

#include "gdsr/denoiser.hpp"
#include "gdsr/guidance.hpp"
#include "gdsr/schedule.hpp"

namespace gdsr {

enum class InitMode { PureNoise, LrPlusNoise };

struct SamplerConfig {
    int num_steps = 50;
    double eta = 0.0;  // 0 = deterministic
    uint64_t seed = 0;
    std::vector<GuidanceTerm> terms;
    GuidancePolicy policy;
    InitMode init = InitMode::PureNoise;
    bool record_trajectory = false;
    /// Clamp the returned image to [0,1]. Oracle suites over unbounded
    /// Gaussian data switch this off; image pipelines keep it on.
    bool clamp_output = true;
};

/// Per-step diagnostics: losses and gradient RMS are evaluated at the
/// pre-correction x0 estimate of that step.
struct TrajectoryStep {
    int t = 0;
    ImageGrid x_t;
    ImageGrid x0_hat;
    std::vector<double> term_losses;
    std::vector<double> term_grad_rms;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
};

/// Evenly spaced descending step grid over {1..T} including both T and 1.
std::vector<int> make_step_grid(int T, int num_steps);

/// sigma_t = eta * sqrt((1-ab_prev)/(1-ab_t)) * sqrt(1 - ab_t/ab_prev),
/// one entry per grid step (the previous grid entry plays t-1; the final
/// step uses alpha_bar(0) = 1 and is always 0).
std::vector<double> sigma_schedule(double eta, const NoiseSchedule& sched,
                                   const std::vector<int>& step_grid);

/// One reverse update:
///   sqrt(ab_prev) * x0_hat + sqrt(1 - ab_prev - sigma^2) * eps + sigma * z.
ImageGrid ddim_step(const ImageGrid& x_t, const ImageGrid& eps, int t, int t_prev,
                    double sigma_t, const ImageGrid& z, const NoiseSchedule& sched);

/// Full guided reverse process. cond (the upsampled LR raster) is
/// required by conditioned models and by LrPlusNoise initialization.
std::pair<ImageGrid, Trajectory> guided_sample(const DenoiserModel& model,
                                               const ImageGrid* cond,
                                               const SamplerConfig& cfg,
                                               const NoiseSchedule& sched,
                                               int height, int width);

/// Same reverse process, started from an explicit state at the largest
/// grid step (cfg.init is ignored). Entry point for resumption and for
/// Monte-Carlo harnesses that control the initial noise directly.
std::pair<ImageGrid, Trajectory> guided_sample_from(const DenoiserModel& model,
                                                    const ImageGrid* cond,
                                                    const ImageGrid& x_init,
                                                    const SamplerConfig& cfg,
                                                    const NoiseSchedule& sched);

}  // namespace gdsr
