#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gdsr/denoiser.hpp"
#include "gdsr/schedule.hpp"
#include "test_support.hpp"

using namespace gdsr;
using test::max_abs_diff;
using test::random_grid;

TEST_CASE("linear schedule, tiny example") {
    NoiseSchedule s = NoiseSchedule::from_betas({0.5, 0.5});
    CHECK(s.alpha_bar(1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.alpha_bar(2) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(s.alpha_bar(0) == 1.0);
}

TEST_CASE("alpha_bar equals the naive running product to 1e-12") {
    NoiseSchedule s = build_schedule(ScheduleKind::Linear, 1000, 1e-4, 0.02);
    double prod = 1.0;
    for (int t = 1; t <= 1000; ++t) {
        prod *= 1.0 - s.beta(t);
        CHECK(std::abs(s.alpha_bar(t) - prod) <= 1e-12);
    }
    CHECK(s.alpha_bar(1000) > 0.0);
    // exact recurrence
    for (int t = 1; t <= 1000; ++t)
        CHECK(s.alpha_bar(t) == s.alpha_bar(t - 1) * (1.0 - s.beta(t)));
}

TEST_CASE("cosine schedule is valid and strictly decreasing") {
    NoiseSchedule s = build_schedule(ScheduleKind::Cosine, 100, 1e-4, 0.999);
    for (int t = 1; t <= 100; ++t) {
        CHECK(s.beta(t) > 0.0);
        CHECK(s.beta(t) <= 0.999);
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        CHECK(s.alpha_bar(t) > 0.0);
    }
}

TEST_CASE("build_schedule rejects bad ranges") {
    CHECK_THROWS_WITH_AS(build_schedule(ScheduleKind::Linear, 0, 1e-4, 0.02),
                         doctest::Contains("invalid range"), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(ScheduleKind::Linear, 10, 0.0, 0.02),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(ScheduleKind::Linear, 10, 0.03, 0.02),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(ScheduleKind::Linear, 10, 0.5, 1.0),
                    std::invalid_argument);
}

TEST_CASE("forward_diffuse special cases") {
    Rng rng(5);
    ImageGrid x0 = random_grid(rng, 4, 4);

    // degenerate beta = 0 keeps alpha_bar at 1: output equals x0
    NoiseSchedule degen = NoiseSchedule::from_betas({0.0});
    ImageGrid eps = rng.normal_grid(4, 4);
    CHECK(max_abs_diff(forward_diffuse(x0, 1, eps, degen), x0) == 0.0);

    // alpha_bar = 0.25 with zero signal: output is sqrt(0.75) * eps
    NoiseSchedule s = NoiseSchedule::from_betas({0.75});
    ImageGrid zeros(4, 4, 0.0);
    ImageGrid ones(4, 4, 1.0);
    ImageGrid out = forward_diffuse(zeros, 1, ones, s);
    for (size_t i = 0; i < out.size(); ++i)
        CHECK(out[i] == doctest::Approx(std::sqrt(0.75)).epsilon(1e-15));

    // alpha_bar -> 0: output approaches eps
    NoiseSchedule crush = NoiseSchedule::from_betas(
        std::vector<double>(40, 0.5));  // alpha_bar = 2^-40
    ImageGrid near_eps = forward_diffuse(x0, 40, eps, crush);
    CHECK(max_abs_diff(near_eps, eps) < 1e-5);

    CHECK_THROWS_WITH_AS(forward_diffuse(x0, 0, eps, s),
                         doctest::Contains("step out of range"), std::out_of_range);
    CHECK_THROWS_AS(forward_diffuse(x0, 2, eps, s), std::out_of_range);
}

TEST_CASE("simple_loss against exact and offset predictors") {
    Rng rng(17);
    NoiseSchedule s = build_schedule(ScheduleKind::Linear, 50, 1e-3, 0.05);
    ImageGrid x0 = random_grid(rng, 6, 6);
    ImageGrid eps = rng.normal_grid(6, 6);

    // sigma2 = 0 with mu = x0 recovers the injected noise exactly
    AnalyticGaussianDenoiser exact({x0, 0.0});
    CHECK(simple_loss(exact, x0, 20, eps, nullptr, s) < 1e-24);

    // constant offset c gives loss c^2
    struct Offset : DenoiserModel {
        const AnalyticGaussianDenoiser inner;
        double c;
        Offset(ImageGrid mu, double c) : inner({std::move(mu), 0.0}), c(c) {}
        ImageGrid predict_eps(const ImageGrid& x_t, int t, const ImageGrid* cond,
                              const NoiseSchedule& sched) const override {
            return add_scalar(inner.predict_eps(x_t, t, cond, sched), c);
        }
        ImageGrid eps_jacobian_vjp(const ImageGrid& x_t, int t, const ImageGrid* cond,
                                   const NoiseSchedule& sched,
                                   const ImageGrid& cot) const override {
            return inner.eps_jacobian_vjp(x_t, t, cond, sched, cot);
        }
    };
    Offset off(x0, 0.3);
    CHECK(simple_loss(off, x0, 20, eps, nullptr, s) ==
          doctest::Approx(0.09).epsilon(1e-12));

    // fixed small case recomputed elementwise (independent oracle)
    ImageGrid pred = off.predict_eps(forward_diffuse(x0, 20, eps, s), 20, nullptr, s);
    double acc = 0.0;
    for (size_t i = 0; i < eps.size(); ++i) {
        const double d = pred[i] - eps[i];
        acc += d * d;
    }
    acc /= static_cast<double>(eps.size());
    CHECK(simple_loss(off, x0, 20, eps, nullptr, s) ==
          doctest::Approx(acc).epsilon(1e-14));
}

TEST_CASE("forward marginal statistics over Monte-Carlo draws") {
    NoiseSchedule s = build_schedule(ScheduleKind::Linear, 100, 1e-4, 0.02);
    // pick t where 1 - alpha_bar is comfortably inside (0,1)
    int t = 60;
    const double ab = s.alpha_bar(t);
    Rng rng(4242);
    ImageGrid x0 = random_grid(rng, 4, 4);
    const int n = 10000;
    ImageGrid sum(4, 4), sumsq(4, 4);
    for (int i = 0; i < n; ++i) {
        ImageGrid eps = rng.normal_grid(4, 4);
        ImageGrid xt = forward_diffuse(x0, t, eps, s);
        for (size_t k = 0; k < xt.size(); ++k) {
            sum[k] += xt[k];
            sumsq[k] += xt[k] * xt[k];
        }
    }
    for (size_t k = 0; k < sum.size(); ++k) {
        const double m = sum[k] / n;
        const double v = (sumsq[k] - n * m * m) / (n - 1);
        CHECK(std::abs(m - std::sqrt(ab) * x0[k]) < 0.02);
        CHECK(std::abs(v - (1.0 - ab)) / (1.0 - ab) < 0.05);
    }
}
