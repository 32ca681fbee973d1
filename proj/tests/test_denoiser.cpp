#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gdsr/checkpoint.hpp"
#include "gdsr/denoiser.hpp"
#include "gdsr/schedule.hpp"
#include "test_support.hpp"

using namespace gdsr;
using test::fd_rel_error;
using test::max_abs_diff;
using test::random_grid;

namespace {
const NoiseSchedule sched = build_schedule(ScheduleKind::Linear, 100, 1e-4, 0.02);
}

TEST_CASE("analytic backend closed forms") {
    Rng rng(1);
    ImageGrid x_t = rng.normal_grid(6, 6);
    const int t = 40;
    const double ab = sched.alpha_bar(t);

    // standard-normal data: eps = sqrt(1-ab) * x_t
    AnalyticGaussianDenoiser unit({ImageGrid(6, 6, 0.0), 1.0});
    ImageGrid e = unit.predict_eps(x_t, t, nullptr, sched);
    for (size_t i = 0; i < e.size(); ++i)
        CHECK(e[i] == doctest::Approx(std::sqrt(1.0 - ab) * x_t[i]).epsilon(1e-14));

    // point mass recovers the injected noise exactly
    ImageGrid mu = random_grid(rng, 6, 6);
    AnalyticGaussianDenoiser point({mu, 0.0});
    ImageGrid eps = rng.normal_grid(6, 6);
    ImageGrid xt2 = forward_diffuse(mu, t, eps, sched);
    CHECK(max_abs_diff(point.predict_eps(xt2, t, nullptr, sched), eps) < 1e-12);

    // and its x0 prediction is mu for any state
    ImageGrid any = rng.normal_grid(6, 6);
    ImageGrid x0 = predict_x0(any, point.predict_eps(any, t, nullptr, sched), t, sched);
    CHECK(max_abs_diff(x0, mu) < 1e-12);
}

TEST_CASE("posterior mean matches the conditional-Gaussian formula") {
    Rng rng(2);
    const double sigma2 = 0.7;
    ImageGrid mu = random_grid(rng, 5, 5);
    AnalyticGaussianDenoiser model({mu, sigma2});
    for (int t : {1, 25, 99}) {
        const double ab = sched.alpha_bar(t);
        ImageGrid x_t = rng.normal_grid(5, 5);
        ImageGrid x0 =
            predict_x0(x_t, model.predict_eps(x_t, t, nullptr, sched), t, sched);
        const double denom = ab * sigma2 + 1.0 - ab;
        for (size_t i = 0; i < x0.size(); ++i) {
            const double expected =
                (sigma2 * std::sqrt(ab) * x_t[i] + (1.0 - ab) * mu[i]) / denom;
            CHECK(std::abs(x0[i] - expected) / std::max(1.0, std::abs(expected)) <
                  1e-10);
        }
    }
}

TEST_CASE("predict_x0 algebra") {
    Rng rng(3);
    ImageGrid x0 = random_grid(rng, 4, 4);
    ImageGrid eps = rng.normal_grid(4, 4);
    const int t = 70;
    CHECK(max_abs_diff(predict_x0(forward_diffuse(x0, t, eps, sched), eps, t, sched),
                       x0) < 1e-12);

    ImageGrid x_t = rng.normal_grid(4, 4);
    ImageGrid zero(4, 4, 0.0);
    ImageGrid out = predict_x0(x_t, zero, t, sched);
    const double inv = 1.0 / std::sqrt(sched.alpha_bar(t));
    for (size_t i = 0; i < out.size(); ++i)
        CHECK(out[i] == doctest::Approx(x_t[i] * inv).epsilon(1e-14));

    NoiseSchedule degen = NoiseSchedule::from_betas({0.0});
    CHECK(max_abs_diff(predict_x0(x_t, eps, 1, degen), x_t) == 0.0);

    // alpha_bar below 1e-12 is refused
    NoiseSchedule crushed = NoiseSchedule::from_betas(std::vector<double>(50, 0.9));
    CHECK_THROWS_WITH_AS(predict_x0(x_t, eps, 50, crushed),
                         doctest::Contains("degenerate alpha"), std::domain_error);
}

TEST_CASE("analytic vjp is the closed-form scalar") {
    Rng rng(4);
    AnalyticGaussianDenoiser model({random_grid(rng, 4, 4), 0.5});
    const int t = 33;
    ImageGrid x_t = rng.normal_grid(4, 4);
    ImageGrid cot = rng.normal_grid(4, 4);
    ImageGrid v = model.eps_jacobian_vjp(x_t, t, nullptr, sched, cot);
    const double s = model.jacobian_scalar(t, sched);
    for (size_t i = 0; i < v.size(); ++i)
        CHECK(v[i] == doctest::Approx(s * cot[i]).epsilon(1e-14));

    ImageGrid zero(4, 4, 0.0);
    CHECK(max_abs_diff(model.eps_jacobian_vjp(x_t, t, nullptr, sched, zero), zero) ==
          0.0);
}

TEST_CASE("conv primitives match finite differences layer by layer") {
    Rng rng(5);
    ConvKernel k(3, 2, 3, true);
    k.init_uniform_fan_in(rng);
    Tensor3 in(2, 6, 6);
    for (double& v : in.data) v = rng.normal();
    Tensor3 cot(3, 6, 6);
    for (double& v : cot.data) v = rng.normal();

    // scalar probe f = <cot, conv(in)>
    auto f = [&](const Tensor3& x) {
        Tensor3 out(3, 6, 6);
        conv_forward(k, x, out);
        double s = 0.0;
        for (size_t i = 0; i < out.data.size(); ++i) s += cot.data[i] * out.data[i];
        return s;
    };
    Tensor3 din(2, 6, 6);
    conv_backward_input(k, cot, din);
    double worst = 0.0;
    Tensor3 probe = in;
    const double h = 1e-6;
    for (size_t i = 0; i < probe.data.size(); ++i) {
        const double keep = probe.data[i];
        probe.data[i] = keep + h;
        const double fp = f(probe);
        probe.data[i] = keep - h;
        const double fm = f(probe);
        probe.data[i] = keep;
        worst = std::max(worst, std::abs((fp - fm) / (2 * h) - din.data[i]));
    }
    CHECK(worst < 1e-7);

    // weight gradients
    ConvKernel grad(3, 2, 3, true);
    conv_backward_weights(k, in, cot, grad);
    double worst_w = 0.0;
    for (size_t i = 0; i < k.w.size(); ++i) {
        const double keep = k.w[i];
        k.w[i] = keep + h;
        const double fp = f(in);
        k.w[i] = keep - h;
        const double fm = f(in);
        k.w[i] = keep;
        worst_w = std::max(worst_w, std::abs((fp - fm) / (2 * h) - grad.w[i]));
    }
    CHECK(worst_w < 1e-6);

    // tanh backward
    Tensor3 z(1, 4, 4), hout;
    for (double& v : z.data) v = rng.normal();
    tanh_forward(z, hout);
    Tensor3 dh(1, 4, 4);
    for (double& v : dh.data) v = rng.normal();
    Tensor3 dz;
    tanh_backward(hout, dh, dz);
    for (size_t i = 0; i < z.data.size(); ++i) {
        const double fd = (std::tanh(z.data[i] + h) - std::tanh(z.data[i] - h)) / (2 * h);
        CHECK(std::abs(dz.data[i] - dh.data[i] * fd) < 1e-9);
    }
}

TEST_CASE("conv denoiser vjp matches finite differences end to end") {
    Rng rng(6);
    ConvDenoiserArch arch;
    arch.hidden_channels = 6;
    arch.num_hidden_layers = 1;
    arch.conditioned = true;
    ConvDenoiser model(arch, 99);
    ImageGrid cond = random_grid(rng, 8, 8);
    const int t = 55;

    for (int trial = 0; trial < 3; ++trial) {
        ImageGrid x_t = rng.normal_grid(8, 8);
        ImageGrid cot = rng.normal_grid(8, 8);
        ImageGrid vjp = model.eps_jacobian_vjp(x_t, t, &cond, sched, cot);
        auto f = [&](const ImageGrid& x) {
            ImageGrid out = model.predict_eps(x, t, &cond, sched);
            return dot(cot, out);
        };
        CHECK(fd_rel_error(f, vjp, x_t) < 1e-4);
    }
}

TEST_CASE("conditioned model demands a condition") {
    ConvDenoiserArch arch;
    arch.conditioned = true;
    ConvDenoiser model(arch, 1);
    ImageGrid x(4, 4, 0.1);
    CHECK_THROWS_WITH_AS(model.predict_eps(x, 10, nullptr, sched),
                         doctest::Contains("missing condition"), std::invalid_argument);
}

namespace {

// expected simple loss under fixed evaluation draws
double eval_simple_loss(const ConvDenoiser& m, const ImageGrid& x0,
                        const NoiseSchedule& s, uint64_t seed) {
    Rng rng(seed);
    double acc = 0.0;
    for (int i = 0; i < 50; ++i) {
        const int t = 1 + static_cast<int>(rng.uniform_index(s.T()));
        ImageGrid eps = rng.normal_grid(x0.height(), x0.width());
        acc += simple_loss(m, x0, t, eps, nullptr, s);
    }
    return acc / 50.0;
}

}  // namespace

TEST_CASE("training reduces the loss on a point-mass dataset") {
    ConvDenoiserArch arch;
    arch.hidden_channels = 8;
    arch.conditioned = false;
    ConvDenoiser model(arch, 11);
    ImageGrid x0(8, 8, 0.5);
    const double before = eval_simple_loss(model, x0, sched, 555);

    std::vector<TrainSample> data{{x0, std::nullopt}};
    TrainConfig tc;
    tc.iterations = 1000;
    tc.learning_rate = 0.01;
    tc.seed = 123;
    auto trace = train_denoiser(model, data, sched, tc);
    REQUIRE(trace.size() == 1000);

    const double after = eval_simple_loss(model, x0, sched, 555);
    // measured 0.080 at this seed pair; a point-mass target is learnable
    CHECK(after < 0.1 * before);
}

TEST_CASE("zero iterations and zero learning rate are inert") {
    ConvDenoiserArch arch;
    arch.hidden_channels = 4;
    ConvDenoiser model(arch, 21);
    const auto w_before = model.kernels()[0].w;
    std::vector<TrainSample> data{{ImageGrid(8, 8, 0.3), std::nullopt}};

    TrainConfig none;
    none.iterations = 0;
    CHECK(train_denoiser(model, data, sched, none).empty());
    CHECK(model.kernels()[0].w == w_before);

    TrainConfig frozen;
    frozen.iterations = 50;
    frozen.learning_rate = 0.0;
    frozen.seed = 9;
    auto t1 = train_denoiser(model, data, sched, frozen);
    CHECK(model.kernels()[0].w == w_before);  // bitwise unchanged
    auto t2 = train_denoiser(model, data, sched, frozen);
    CHECK(t1 == t2);  // fixed sampling seed: trace repeats exactly
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
    std::vector<TrainSample> data{{ImageGrid(8, 8, 0.4), std::nullopt}};
    TrainConfig tc;
    tc.iterations = 60;
    tc.learning_rate = 0.03;
    tc.seed = 77;

    ConvDenoiserArch arch;
    arch.hidden_channels = 4;
    ConvDenoiser a(arch, 5), b(arch, 5);
    auto ta = train_denoiser(a, data, sched, tc);
    auto tb = train_denoiser(b, data, sched, tc);
    CHECK(ta == tb);
    for (size_t i = 0; i < a.kernels().size(); ++i) {
        CHECK(a.kernels()[i].w == b.kernels()[i].w);
        CHECK(a.kernels()[i].b == b.kernels()[i].b);
    }
    CHECK(a.time_weight() == b.time_weight());
}

TEST_CASE("checkpoint round trip preserves predictions bitwise") {
    namespace fs = std::filesystem;
    Rng rng(8);
    ConvDenoiserArch arch;
    arch.hidden_channels = 6;
    arch.num_hidden_layers = 2;
    arch.conditioned = true;
    ConvDenoiser model(arch, 31);

    const std::string path =
        (fs::temp_directory_path() / "gdsr_ckpt_test.json").string();
    save_denoiser(model, path);
    ConvDenoiser loaded = load_denoiser(path);

    ImageGrid x = rng.normal_grid(8, 8);
    ImageGrid cond = random_grid(rng, 8, 8);
    CHECK(test::bitwise_equal(model.predict_eps(x, 42, &cond, sched),
                              loaded.predict_eps(x, 42, &cond, sched)));
    fs::remove(path);
}

TEST_CASE("divergence is reported") {
    ConvDenoiserArch arch;
    arch.hidden_channels = 4;
    ConvDenoiser model(arch, 55);
    std::vector<TrainSample> data{{ImageGrid(8, 8, 0.5), std::nullopt}};
    TrainConfig tc;
    tc.iterations = 400;
    tc.learning_rate = 1e5;  // guaranteed blow-up
    tc.seed = 3;
    CHECK_THROWS_WITH_AS(train_denoiser(model, data, sched, tc),
                         doctest::Contains("divergence"), std::runtime_error);
}
