#include "gdsr/sampler.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gdsr/rng.hpp"

namespace gdsr {

std::vector<int> make_step_grid(int T, int num_steps) {
    if (num_steps < 1)
        throw std::invalid_argument("invalid range: num_steps must be >= 1");
    if (num_steps > T) num_steps = T;
    std::vector<int> grid;
    if (num_steps == 1) {
        grid.push_back(T);
        return grid;
    }
    // descending, includes T and 1, deduplicated
    for (int i = 0; i < num_steps; ++i) {
        double f = static_cast<double>(i) / (num_steps - 1);
        int t = static_cast<int>(std::lround(T - f * (T - 1)));
        if (grid.empty() || grid.back() != t) grid.push_back(t);
    }
    return grid;
}

std::vector<double> sigma_schedule(double eta, const NoiseSchedule& sched,
                                   const std::vector<int>& step_grid) {
    if (eta < 0.0 || eta > 1.0)
        throw std::invalid_argument("invalid range: eta must be in [0,1]");
    std::vector<double> sigmas(step_grid.size(), 0.0);
    if (eta == 0.0) return sigmas;
    for (size_t i = 0; i < step_grid.size(); ++i) {
        const int t = step_grid[i];
        const int t_prev = (i + 1 < step_grid.size()) ? step_grid[i + 1] : 0;
        const double ab = sched.alpha_bar(t), abp = sched.alpha_bar(t_prev);
        sigmas[i] = eta * std::sqrt((1.0 - abp) / (1.0 - ab)) *
                    std::sqrt(1.0 - ab / abp);
    }
    return sigmas;
}

ImageGrid ddim_step(const ImageGrid& x_t, const ImageGrid& eps, int t, int t_prev,
                    double sigma_t, const ImageGrid& z, const NoiseSchedule& sched) {
    require_same_shape(x_t, eps);
    require_same_shape(x_t, z);
    const double abp = sched.alpha_bar(t_prev);
    const double rad = 1.0 - abp - sigma_t * sigma_t;
    if (rad < -1e-12) throw std::domain_error("negative radicand");
    const ImageGrid x0 = predict_x0(x_t, eps, t, sched);
    const double ca = std::sqrt(abp), cb = std::sqrt(std::max(rad, 0.0));
    ImageGrid out(x_t.height(), x_t.width());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = ca * x0[i] + cb * eps[i] + sigma_t * z[i];
    return out;
}

namespace {

std::pair<ImageGrid, Trajectory> run_chain(const DenoiserModel& model,
                                           const ImageGrid* cond, ImageGrid x,
                                           Rng& rng, const SamplerConfig& cfg,
                                           const NoiseSchedule& sched);

}  // namespace

std::pair<ImageGrid, Trajectory> guided_sample(const DenoiserModel& model,
                                               const ImageGrid* cond,
                                               const SamplerConfig& cfg,
                                               const NoiseSchedule& sched,
                                               int height, int width) {
    const std::vector<int> grid = make_step_grid(sched.T(), cfg.num_steps);
    Rng rng(cfg.seed);

    ImageGrid x(height, width);
    if (cfg.init == InitMode::LrPlusNoise) {
        if (cond == nullptr) throw std::invalid_argument("missing condition");
        require_same_shape(*cond, x);
        const double ab = sched.alpha_bar(grid.front());
        const ImageGrid noise = rng.normal_grid(height, width);
        const double ca = std::sqrt(ab), cb = std::sqrt(1.0 - ab);
        for (size_t i = 0; i < x.size(); ++i)
            x[i] = ca * (*cond)[i] + cb * noise[i];
    } else {
        x = rng.normal_grid(height, width);
    }
    return run_chain(model, cond, std::move(x), rng, cfg, sched);
}

std::pair<ImageGrid, Trajectory> guided_sample_from(const DenoiserModel& model,
                                                    const ImageGrid* cond,
                                                    const ImageGrid& x_init,
                                                    const SamplerConfig& cfg,
                                                    const NoiseSchedule& sched) {
    Rng rng(cfg.seed);
    return run_chain(model, cond, x_init, rng, cfg, sched);
}

namespace {

std::pair<ImageGrid, Trajectory> run_chain(const DenoiserModel& model,
                                           const ImageGrid* cond, ImageGrid x,
                                           Rng& rng, const SamplerConfig& cfg,
                                           const NoiseSchedule& sched) {
    const int T = sched.T();
    const int height = x.height(), width = x.width();
    const std::vector<int> grid = make_step_grid(T, cfg.num_steps);
    const std::vector<double> sigmas = sigma_schedule(cfg.eta, sched, grid);

    Trajectory traj;
    for (size_t i = 0; i < grid.size(); ++i) {
        const int t = grid[i];
        const int t_prev = (i + 1 < grid.size()) ? grid[i + 1] : 0;

        if (!x.all_finite())
            throw std::runtime_error("non-finite state at step " + std::to_string(t));

        const ImageGrid eps = model.predict_eps(x, t, cond, sched);

        std::vector<std::pair<double, ImageGrid>> grads;
        const bool active = cfg.policy.active_at(t, T) && !cfg.terms.empty();
        if (cfg.record_trajectory || active) {
            const ImageGrid x0_pre = predict_x0(x, eps, t, sched);
            TrajectoryStep rec;
            if (active) {
                for (const GuidanceTerm& term : cfg.terms) {
                    ImageGrid g = guidance_grad_xt(term, x, eps, t, model,
                                                   cfg.policy, sched, cond);
                    if (cfg.record_trajectory) {
                        rec.term_losses.push_back(term.loss(x0_pre));
                        rec.term_grad_rms.push_back(rms(g));
                    }
                    grads.emplace_back(term.rho, std::move(g));
                }
            }
            if (cfg.record_trajectory) {
                rec.t = t;
                rec.x_t = x;
                rec.x0_hat = x0_pre;
                traj.steps.push_back(std::move(rec));
            }
        }

        const ImageGrid eps_adj = adjust_noise(eps, grads, t, sched, cfg.policy);
        ImageGrid z(height, width);
        if (sigmas[i] > 0.0) z = rng.normal_grid(height, width);
        x = ddim_step(x, eps_adj, t, t_prev, sigmas[i], z, sched);
    }

    if (!x.all_finite()) throw std::runtime_error("non-finite state at step 0");
    if (cfg.clamp_output) x = clamp01(x);
    return {std::move(x), std::move(traj)};
}

}  // namespace

}  // namespace gdsr
