#include "gdsr/verify.hpp"

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>

#include "gdsr/checkpoint.hpp"
#include "gdsr/dataset.hpp"
#include "gdsr/degrade.hpp"
#include "gdsr/denoiser.hpp"
#include "gdsr/experiment.hpp"
#include "gdsr/fft.hpp"
#include "gdsr/guidance.hpp"
#include "gdsr/metrics.hpp"
#include "gdsr/perceptual.hpp"
#include "gdsr/rng.hpp"
#include "gdsr/sampler.hpp"
#include "gdsr/visual_loss.hpp"

namespace gdsr {

namespace fs = std::filesystem;

namespace {

// ------------------------------------------------------------ utilities

using LossFn = std::function<double(const ImageGrid&)>;

ImageGrid random_grid(Rng& rng, int h, int w, double lo, double hi) {
    ImageGrid g(h, w);
    for (size_t i = 0; i < g.size(); ++i) g[i] = rng.uniform(lo, hi);
    return g;
}

// central differences against an analytic gradient; returns
// ||g - g_fd||_2 / ||g_fd||_2
double fd_rel_error(const LossFn& f, const ImageGrid& grad, ImageGrid x,
                    double h = 1e-4) {
    ImageGrid fd(x.height(), x.width());
    for (size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double fp = f(x);
        x[i] = keep - h;
        const double fm = f(x);
        x[i] = keep;
        fd[i] = (fp - fm) / (2.0 * h);
    }
    double dn = 0.0, fn = 0.0;
    for (size_t i = 0; i < fd.size(); ++i) {
        const double d = grad[i] - fd[i];
        dn += d * d;
        fn += fd[i] * fd[i];
    }
    return std::sqrt(dn) / std::max(std::sqrt(fn), 1e-300);
}

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("io failure: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmtd(double v, const char* spec = "%.4g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

// independent straight-line double-sum DFT (test oracle, O(N^4))
std::vector<std::complex<double>> naive_dft2(const ImageGrid& img) {
    const int H = img.height(), W = img.width();
    std::vector<std::complex<double>> out(static_cast<size_t>(H) * W);
    for (int u = 0; u < H; ++u)
        for (int v = 0; v < W; ++v) {
            std::complex<double> acc(0.0, 0.0);
            for (int x = 0; x < H; ++x)
                for (int y = 0; y < W; ++y) {
                    const double ang = -2.0 * std::numbers::pi *
                                       (static_cast<double>(u) * x / H +
                                        static_cast<double>(v) * y / W);
                    acc += img.at(x, y) * std::complex<double>(std::cos(ang),
                                                               std::sin(ang));
                }
            out[static_cast<size_t>(u) * W + v] = acc;
        }
    return out;
}

// spectral loss transcription: shift, log-magnitude, standardize, mean
// of squared difference — written straight-line, no library calls
double spectral_loss_transcription(const ImageGrid& hr, const ImageGrid& sr) {
    const int H = hr.height(), W = hr.width();
    const int n = H * W;
    auto normalized_logmag = [&](const ImageGrid& img) {
        const auto F = naive_dft2(img);
        std::vector<double> m(n);
        for (int u = 0; u < H; ++u)
            for (int v = 0; v < W; ++v) {
                const int su = (u + H / 2) % H, sv = (v + W / 2) % W;
                m[su * W + sv] = std::log(1.0 + std::abs(F[static_cast<size_t>(u) * W + v]));
            }
        double mu = 0.0;
        for (double x : m) mu += x;
        mu /= n;
        double var = 0.0;
        for (double x : m) var += (x - mu) * (x - mu);
        const double sd = std::sqrt(var / n) + 1e-8;
        for (double& x : m) x = (x - mu) / sd;
        return m;
    };
    const auto a = normalized_logmag(hr);
    const auto b = normalized_logmag(sr);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / n;
}

// feature+mask loss transcription: naive circular conv / tanh / softmax
double perceptual_loss_transcription(const ImageGrid& hr, const ImageGrid& sr,
                                     const FeatureExtractor& fe,
                                     const SoftSegmenter& seg) {
    const int H = hr.height(), W = hr.width();
    auto features = [&](const ImageGrid& img) {
        std::vector<std::vector<double>> cur = {
            std::vector<double>(img.data().begin(), img.data().end())};
        for (int l = 0; l < fe.tap_layer(); ++l) {
            const ConvKernel& k = fe.kernels()[l];
            const int c = k.ksize / 2;
            std::vector<std::vector<double>> next(
                k.out_ch, std::vector<double>(static_cast<size_t>(H) * W, 0.0));
            for (int o = 0; o < k.out_ch; ++o)
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x) {
                        double acc = 0.0;
                        for (int i = 0; i < k.in_ch; ++i)
                            for (int ky = 0; ky < k.ksize; ++ky)
                                for (int kx = 0; kx < k.ksize; ++kx) {
                                    const int yy = ((y + ky - c) % H + H) % H;
                                    const int xx = ((x + kx - c) % W + W) % W;
                                    acc += k.wat(o, i, ky, kx) * cur[i][yy * W + xx];
                                }
                        next[o][y * W + x] = std::tanh(acc);
                    }
            cur = std::move(next);
        }
        return cur;
    };
    auto masks = [&](const ImageGrid& img) {
        const int k = static_cast<int>(seg.centers.size());
        std::vector<std::vector<double>> out(
            k, std::vector<double>(static_cast<size_t>(H) * W));
        for (int i = 0; i < H * W; ++i) {
            double v = img[i];
            if (v < 0.0) v = 0.0;
            if (v > 1.0) v = 1.0;
            double z = 0.0;
            for (int c = 0; c < k; ++c)
                z += std::exp(-(v - seg.centers[c]) * (v - seg.centers[c]) /
                              seg.temperature);
            for (int c = 0; c < k; ++c)
                out[c][i] = std::exp(-(v - seg.centers[c]) * (v - seg.centers[c]) /
                                     seg.temperature) /
                            z;
        }
        return out;
    };
    auto mse = [&](const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b) {
        double s = 0.0;
        size_t n = 0;
        for (size_t c = 0; c < a.size(); ++c)
            for (size_t i = 0; i < a[c].size(); ++i) {
                const double d = a[c][i] - b[c][i];
                s += d * d;
                ++n;
            }
        return s / static_cast<double>(n);
    };
    return mse(features(hr), features(sr)) + mse(masks(hr), masks(sr));
}

// naive sliding-window transcription of the structural similarity index
double ssim_transcription(const ImageGrid& a, const ImageGrid& b) {
    const int win = 8, H = a.height(), W = a.width();
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    int count = 0;
    for (int r = 0; r + win <= H; ++r)
        for (int c = 0; c + win <= W; ++c) {
            double ma = 0, mb = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    ma += a.at(r + i, c + j);
                    mb += b.at(r + i, c + j);
                }
            ma /= win * win;
            mb /= win * win;
            double va = 0, vb = 0, cov = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    const double da = a.at(r + i, c + j) - ma;
                    const double db = b.at(r + i, c + j) - mb;
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            va /= win * win;
            vb /= win * win;
            cov /= win * win;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / count;
}

// ---------------------------------------------------------- criterion 1

CheckResult check_gradient_oracles() {
    CheckResult res{"gradient_oracles", true, 0.0, ""};
    const NoiseSchedule sched = build_schedule(ScheduleKind::Linear, 100, 1e-4, 0.02);
    Rng rng(20240801);
    const double tol = 1e-4;
    double worst = 0.0;
    auto note = [&](const char* what, double err) {
        worst = std::max(worst, err);
        if (err >= tol) {
            res.passed = false;
            res.details += std::string(what) + " rel=" + fmtd(err) + "; ";
        }
    };

    for (int i = 0; i < 20; ++i) {
        // visual loss
        {
            const ImageGrid hr = random_grid(rng, 8, 8, 0.0, 1.0);
            const ImageGrid sr = random_grid(rng, 8, 8, 0.0, 1.0);
            LossFn f = [&](const ImageGrid& x) { return visual_loss(hr, x); };
            note("visual", fd_rel_error(f, visual_loss_grad(hr, sr), sr));
        }
        // perceptual loss (inputs kept clear of the [0,1] clamp kinks)
        {
            FeatureExtractorSpec spec;
            spec.seed = 100 + i;
            const FeatureExtractor fe(spec);
            const SoftSegmenter seg = SoftSegmenter::uniform(4, 0.05);
            const ImageGrid hr = random_grid(rng, 8, 8, 0.05, 0.95);
            const ImageGrid sr = random_grid(rng, 8, 8, 0.05, 0.95);
            LossFn f = [&](const ImageGrid& x) { return perceptual_loss(hr, x, fe, seg); };
            note("perceptual", fd_rel_error(f, perceptual_loss_grad(hr, sr, fe, seg), sr));
        }
        // data fidelity
        {
            const DegradationModel d = DegradationModel::gaussian(4, 1.0, 5);
            const ImageGrid hr = random_grid(rng, 8, 8, 0.0, 1.0);
            const ImageGrid lr = degrade(random_grid(rng, 8, 8, 0.0, 1.0), d);
            const GuidanceTerm term = make_data_fidelity_term(lr, d, 1.0);
            note("data_fidelity", fd_rel_error(term.loss, term.gradient(hr), hr));
        }
        // guidance_grad_xt, both backends x both jacobian modes
        {
            const int t = 1 + static_cast<int>(rng.uniform_index(sched.T()));
            const ImageGrid target = random_grid(rng, 8, 8, 0.0, 1.0);
            const GuidanceTerm term = make_identity_term(target, 1.0);
            const ImageGrid x_t = rng.normal_grid(8, 8);

            AnalyticGaussianParams ap{random_grid(rng, 8, 8, 0.0, 1.0), 0.5};
            const AnalyticGaussianDenoiser ana(ap);
            ConvDenoiserArch arch;
            arch.hidden_channels = 8;
            arch.conditioned = false;
            const ConvDenoiser conv(arch, 500 + i);

            auto run_backend = [&](const DenoiserModel& model, const char* nm) {
                GuidancePolicy pol;
                pol.jacobian_mode = JacobianMode::ThroughDenoiser;
                const ImageGrid eps = model.predict_eps(x_t, t, nullptr, sched);
                // full chain: reevaluates predict_eps at perturbed x_t
                LossFn f_full = [&](const ImageGrid& x) {
                    const ImageGrid e = model.predict_eps(x, t, nullptr, sched);
                    return term.loss(predict_x0(x, e, t, sched));
                };
                note((std::string(nm) + "/through_denoiser").c_str(),
                     fd_rel_error(f_full,
                                  guidance_grad_xt(term, x_t, eps, t, model, pol, sched),
                                  x_t));
                // detached mode: the map holds eps frozen at the base point
                GuidancePolicy pol2;
                pol2.jacobian_mode = JacobianMode::X0Detached;
                LossFn f_frozen = [&](const ImageGrid& x) {
                    return term.loss(predict_x0(x, eps, t, sched));
                };
                note((std::string(nm) + "/x0_detached").c_str(),
                     fd_rel_error(f_frozen,
                                  guidance_grad_xt(term, x_t, eps, t, model, pol2, sched),
                                  x_t));
            };
            run_backend(ana, "analytic");
            run_backend(conv, "conv");
        }
    }
    if (res.passed)
        res.details = "20 instances/family, all rel < 1e-4 (max " + fmtd(worst) + ")";
    return res;
}

// ---------------------------------------------------------- criterion 2

CheckResult check_analytic_sampler() {
    CheckResult res{"analytic_sampler", true, 0.0, ""};
    const NoiseSchedule sched = build_schedule(ScheduleKind::Linear, 1000, 1e-4, 0.02);
    Rng seed_rng(777);
    const ImageGrid mu = random_grid(seed_rng, 8, 8, 0.0, 1.0);
    const int chains = 1000, steps = 100;

    for (double sigma2 : {0.0, 0.25, 1.0}) {
        const AnalyticGaussianDenoiser model({mu, sigma2});
        SamplerConfig cfg;
        cfg.num_steps = steps;
        cfg.eta = 0.0;
        cfg.clamp_output = false;  // Gaussian data is not an image
        ImageGrid sum(8, 8), sumsq(8, 8);
        double mse_acc = 0.0;
        // 500 antithetic pairs = 1000 chains; pairing cancels the initial-
        // noise contribution to the sample mean exactly (the eta=0 chain
        // is affine in its initialization) without biasing the variance
        Rng chain_rng = Rng(42).split(static_cast<uint64_t>(sigma2 * 100));
        for (int c = 0; c < chains / 2; ++c) {
            const ImageGrid x0 = chain_rng.normal_grid(8, 8);
            for (int sign = 0; sign < 2; ++sign) {
                const ImageGrid init = sign == 0 ? x0 : scale(x0, -1.0);
                auto [out, traj] = guided_sample_from(model, nullptr, init, cfg, sched);
                for (size_t i = 0; i < out.size(); ++i) {
                    sum[i] += out[i];
                    sumsq[i] += out[i] * out[i];
                    const double d = out[i] - mu[i];
                    mse_acc += d * d;
                }
            }
        }
        double max_mean_err = 0.0, var_mean = 0.0;
        for (size_t i = 0; i < sum.size(); ++i) {
            const double m = sum[i] / chains;
            max_mean_err = std::max(max_mean_err, std::abs(m - mu[i]));
            var_mean += (sumsq[i] - chains * m * m) / (chains - 1);
        }
        var_mean /= static_cast<double>(sum.size());
        const double mse = mse_acc / (static_cast<double>(chains) * 64.0);

        std::string tag = "sigma2=" + fmtd(sigma2, "%.2f");
        if (sigma2 == 0.0) {
            if (mse >= 1e-3) {
                res.passed = false;
                res.details += tag + " MSE=" + fmtd(mse) + " (need <1e-3); ";
            }
        } else {
            const double rel = std::abs(var_mean - sigma2) / sigma2;
            if (max_mean_err >= 0.05 || rel >= 0.15) {
                res.passed = false;
                res.details += tag + " mean_err=" + fmtd(max_mean_err) +
                               " var_rel=" + fmtd(rel) + "; ";
            }
        }
        res.details += tag + "(mean_err " + fmtd(max_mean_err) + ", var " +
                       fmtd(var_mean) + ") ";
    }
    return res;
}

// ---------------------------------------------------------- criterion 3

CheckResult check_guidance_efficacy() {
    CheckResult res{"guidance_efficacy", true, 0.0, ""};
    const NoiseSchedule sched = build_schedule(ScheduleKind::Linear, 1000, 1e-4, 0.02);
    Rng rng(991);
    const ImageGrid mu = random_grid(rng, 8, 8, 0.0, 1.0);
    const AnalyticGaussianDenoiser model({mu, 1.0});
    ImageGrid x_star = rng.normal_grid(8, 8);
    for (size_t i = 0; i < x_star.size(); ++i) x_star[i] = mu[i] + x_star[i];

    const int chains = 200, steps = 100;
    auto mean_mse = [&](double rho) {
        SamplerConfig cfg;
        cfg.num_steps = steps;
        cfg.eta = 0.0;
        cfg.clamp_output = false;
        if (rho > 0.0) cfg.terms = {make_identity_term(x_star, rho)};
        double acc = 0.0;
        for (int c = 0; c < chains; ++c) {
            cfg.seed = Rng(5150).split(c).seed();
            auto [out, traj] = guided_sample(model, nullptr, cfg, sched, 8, 8);
            acc += l2_norm_sq(out, x_star) / static_cast<double>(out.size());
        }
        return acc / chains;
    };

    const double unguided = mean_mse(0.0);
    double best_ratio = 1e300, best_rho = 0.0;
    for (double rho : {0.1, 0.3, 1.0, 3.0, 10.0}) {
        const double ratio = mean_mse(rho) / unguided;
        if (ratio < best_ratio) {
            best_ratio = ratio;
            best_rho = rho;
        }
    }
    res.passed = best_ratio <= 0.5;
    res.details = "selected rho=" + fmtd(best_rho, "%.1f") + ", mse ratio=" +
                  fmtd(best_ratio) + " (unguided mse " + fmtd(unguided) + ")";
    return res;
}

// ---------------------------------------------------------- criterion 4

CheckResult check_spectral_invariants() {
    CheckResult res{"spectral_invariants", true, 0.0, ""};
    Rng rng(314159);

    // translation invariance across every circular shift
    const ImageGrid base = random_grid(rng, 16, 16, 0.0, 1.0);
    double max_shift_loss = 0.0;
    for (int dy = 0; dy < 16; ++dy)
        for (int dx = 0; dx < 16; ++dx)
            max_shift_loss =
                std::max(max_shift_loss, visual_loss(base, circular_shift(base, dy, dx)));
    if (max_shift_loss >= 1e-12) {
        res.passed = false;
        res.details += "shift loss " + fmtd(max_shift_loss) + "; ";
    }

    // Parseval on mixed-radix sizes
    double worst_parseval = 0.0;
    for (int n : {6, 12, 20, 64}) {
        const ImageGrid x = rng.normal_grid(n, n);
        const ComplexSpectrum F = fft2(x);
        double spatial = 0.0, spectral = 0.0;
        for (size_t i = 0; i < x.size(); ++i) spatial += x[i] * x[i];
        for (size_t i = 0; i < F.size(); ++i) spectral += std::norm(F[i]);
        spectral /= static_cast<double>(n) * n;
        worst_parseval =
            std::max(worst_parseval, std::abs(spatial - spectral) / spatial);
    }
    if (worst_parseval >= 1e-9) {
        res.passed = false;
        res.details += "parseval rel " + fmtd(worst_parseval) + "; ";
    }

    // normalization contracts
    const ImageGrid m = random_grid(rng, 12, 12, -3.0, 7.0);
    const ImageGrid nm = normalize_spectrum(m);
    if (std::abs(mean(nm)) >= 1e-12 || std::abs(stddev(nm) - 1.0) >= 1e-6) {
        res.passed = false;
        res.details += "normalize contract (mean " + fmtd(mean(nm)) + ", std " +
                       fmtd(stddev(nm)) + "); ";
    }
    const ImageGrid cm = normalize_spectrum(ImageGrid(8, 8, 3.7));
    for (size_t i = 0; i < cm.size(); ++i)
        if (cm[i] != 0.0) {
            res.passed = false;
            res.details += "constant normalize not zero; ";
            break;
        }

    // degenerate constant images keep loss and gradient finite
    const ImageGrid flat(8, 8, 0.0);
    const ImageGrid textured = random_grid(rng, 8, 8, 0.0, 1.0);
    const double dl = visual_loss(textured, flat);
    const ImageGrid dg = visual_loss_grad(textured, flat);
    if (!std::isfinite(dl) || !dg.all_finite()) {
        res.passed = false;
        res.details += "degenerate case non-finite; ";
    }
    if (res.passed)
        res.details = "max shift loss " + fmtd(max_shift_loss) + ", parseval rel " +
                      fmtd(worst_parseval);
    return res;
}

// ---------------------------------------------------------- criterion 5

CheckResult check_algebraic_identities() {
    CheckResult res{"algebraic_identities", true, 0.0, ""};
    const NoiseSchedule sched = build_schedule(ScheduleKind::Linear, 1000, 1e-4, 0.02);
    Rng rng(8888);
    const int ts[] = {1, 7, 250, 500, 999, 1000};

    double worst = 0.0;
    auto gap = [&](double v) { worst = std::max(worst, v); };

    for (int t : ts) {
        const ImageGrid x0 = random_grid(rng, 8, 8, 0.0, 1.0);
        const ImageGrid eps = rng.normal_grid(8, 8);
        // forward/backward round trip
        const ImageGrid x_t = forward_diffuse(x0, t, eps, sched);
        const ImageGrid rec = predict_x0(x_t, eps, t, sched);
        for (size_t i = 0; i < rec.size(); ++i) gap(std::abs(rec[i] - x0[i]));
        // score <-> noise round trip
        const ImageGrid back = score_to_noise(noise_to_score(eps, t, sched), t, sched);
        for (size_t i = 0; i < back.size(); ++i) gap(std::abs(back[i] - eps[i]));
    }

    // terminal collapse: alpha_bar(0) = 1, sigma = 0 returns x0_hat exactly
    {
        const ImageGrid x_t = rng.normal_grid(8, 8);
        const ImageGrid eps = rng.normal_grid(8, 8);
        const ImageGrid z(8, 8);
        const ImageGrid stepped = ddim_step(x_t, eps, 5, 0, 0.0, z, sched);
        const ImageGrid x0h = predict_x0(x_t, eps, 5, sched);
        for (size_t i = 0; i < stepped.size(); ++i)
            gap(std::abs(stepped[i] - x0h[i]));
    }

    if (worst >= 1e-12) {
        res.passed = false;
        res.details += "roundtrip gap " + fmtd(worst) + "; ";
    }

    // rho = 0 must be a bitwise no-op
    {
        const ImageGrid eps = rng.normal_grid(8, 8);
        const ImageGrid g = rng.normal_grid(8, 8);
        GuidancePolicy pol;
        const ImageGrid adj = adjust_noise(eps, {{0.0, g}}, 500, sched, pol);
        if (adj.data() != eps.data()) {
            res.passed = false;
            res.details += "rho=0 not bitwise; ";
        }
    }

    // adjust_noise linearity and permutation invariance
    {
        const ImageGrid eps = rng.normal_grid(8, 8);
        const ImageGrid ga = rng.normal_grid(8, 8);
        const ImageGrid gb = rng.normal_grid(8, 8);
        GuidancePolicy pol;
        pol.clip_threshold = 1e9;  // keep the map linear for this identity
        const ImageGrid both = adjust_noise(eps, {{0.7, ga}, {1.3, gb}}, 500, sched, pol);
        const ImageGrid a_only = adjust_noise(eps, {{0.7, ga}}, 500, sched, pol);
        const ImageGrid b_only = adjust_noise(eps, {{1.3, gb}}, 500, sched, pol);
        const ImageGrid perm = adjust_noise(eps, {{1.3, gb}, {0.7, ga}}, 500, sched, pol);
        double lin = 0.0;
        for (size_t i = 0; i < eps.size(); ++i) {
            lin = std::max(lin,
                           std::abs(both[i] - (a_only[i] + b_only[i] - eps[i])));
            lin = std::max(lin, std::abs(both[i] - perm[i]));
        }
        if (lin >= 1e-12) {
            res.passed = false;
            res.details += "linearity gap " + fmtd(lin) + "; ";
        }
    }
    if (res.passed) res.details = "all identities at 1e-12, max gap " + fmtd(worst);
    return res;
}

// ---------------------------------------------------------- criterion 6

ExperimentConfig small_pipeline_config(const std::string& out_dir) {
    ExperimentConfig cfg;
    cfg.seed = 11;
    cfg.T = 200;
    cfg.num_steps = 12;
    cfg.dataset_count = 2;
    cfg.dataset_holdout = 2;
    cfg.dataset_size = 32;
    cfg.iterations = 120;
    cfg.hidden_channels = 8;
    cfg.guidance = {{"data_fidelity", 1.0, "hr", "grad_in_noise"},
                    {"visual", 1.0, "hr", "grad_in_noise"}};
    cfg.output_dir = out_dir;
    return cfg;
}

CheckResult check_determinism(const std::string& scratch) {
    CheckResult res{"determinism", true, 0.0, ""};
    const std::string dir = (fs::path(scratch) / "det").string();
    fs::remove_all(dir);
    ExperimentConfig cfg = small_pipeline_config(dir);

    // two consecutive runs into the same directory, snapshotting between
    const TrainResult t1 = run_train(cfg);
    const std::string ckpt_snap = read_file_bytes(t1.checkpoint_path);
    const std::string trace_snap = read_file_bytes(t1.trace_csv_path);
    const TrainResult t2 = run_train(cfg);
    if (read_file_bytes(t2.checkpoint_path) != ckpt_snap ||
        read_file_bytes(t2.trace_csv_path) != trace_snap) {
        res.passed = false;
        res.details += "train outputs differ across runs; ";
    }

    const SrResult s1 = run_sr(cfg, t2.checkpoint_path);
    std::vector<std::pair<std::string, std::string>> snaps;
    snaps.emplace_back(s1.metrics_csv_path, read_file_bytes(s1.metrics_csv_path));
    for (const auto& img : s1.images) {
        const std::string p = (fs::path(dir) / (img.id + "_sr.pgm")).string();
        snaps.emplace_back(p, read_file_bytes(p));
    }
    run_sr(cfg, t2.checkpoint_path);
    for (const auto& [path, bytes] : snaps)
        if (read_file_bytes(path) != bytes) {
            res.passed = false;
            res.details += "sr output differs: " + path + "; ";
        }
    if (res.passed) res.details = "train and sr outputs bitwise stable";
    return res;
}

// ---------------------------------------------------------- criterion 7

// pinned guidance strengths for the toy SR experiment (from the tuning
// sweep; see README)
constexpr double kRhoDataFidelity = 2.0;
constexpr double kRhoVisual = 2.0;
constexpr double kRhoPerceptual = 5.0;

ExperimentConfig e2e_config(const std::string& out_dir) {
    ExperimentConfig cfg;
    cfg.seed = 2024;
    cfg.T = 1000;
    cfg.num_steps = 50;
    cfg.dataset_count = 32;
    cfg.dataset_holdout = 16;
    cfg.dataset_size = 64;
    cfg.scale = 4;
    cfg.iterations = 2000;
    cfg.finetune_iterations = 400;
    cfg.hidden_channels = 16;
    cfg.output_dir = out_dir;
    return cfg;
}

struct E2eShared {
    std::string checkpoint;
    std::string out_dir;
};

CheckResult check_end_to_end_sr(const std::string& scratch, E2eShared& shared) {
    CheckResult res{"end_to_end_sr", true, 0.0, ""};
    const std::string dir = (fs::path(scratch) / "e2e").string();
    fs::remove_all(dir);
    ExperimentConfig cfg = e2e_config(dir);
    shared.out_dir = dir;

    const TrainResult tr = run_train(cfg);
    shared.checkpoint = tr.checkpoint_path;

    // bicubic baseline over the same held-out set
    const ExperimentData data = prepare_data(cfg);
    double bicubic_psnr = 0.0;
    for (const EvalItem& item : data.eval) bicubic_psnr += psnr(item.hr, item.cond);
    bicubic_psnr /= static_cast<double>(data.eval.size());

    const GuidanceSpec df{"data_fidelity", kRhoDataFidelity, "hr", "grad_in_noise"};
    const GuidanceSpec vis{"visual", kRhoVisual, "hr", "grad_in_noise"};
    const GuidanceSpec perc{"perceptual", kRhoPerceptual, "hr", "grad_in_noise"};

    auto run_variant = [&](const std::string& name,
                           std::vector<GuidanceSpec> guidance) {
        ExperimentConfig c = cfg;
        c.guidance = std::move(guidance);
        c.output_dir = (fs::path(dir) / name).string();
        return run_sr(c, tr.checkpoint_path);
    };
    const SrResult unguided = run_variant("unguided", {});
    const SrResult df_only = run_variant("df", {df});
    const SrResult vis_df = run_variant("visual_df", {vis, df});
    const SrResult perc_df = run_variant("perceptual_df", {perc, df});
    const SrResult all3 = run_variant("all", {vis, perc, df});

    std::ostringstream d;
    d << "bicubic=" << fmtd(bicubic_psnr, "%.2f")
      << " unguided=" << fmtd(unguided.mean_psnr, "%.2f")
      << " df=" << fmtd(df_only.mean_psnr, "%.2f")
      << " vis+df=" << fmtd(vis_df.mean_psnr, "%.2f")
      << " perc+df=" << fmtd(perc_df.mean_psnr, "%.2f")
      << " all=" << fmtd(all3.mean_psnr, "%.2f")
      << " | visual_loss unguided=" << fmtd(unguided.mean_visual_loss)
      << " vis+df=" << fmtd(vis_df.mean_visual_loss);

    for (const SrResult* g : {&df_only, &vis_df, &perc_df, &all3})
        if (g->mean_psnr < bicubic_psnr) {
            res.passed = false;
            d << " [" << g->label << " < bicubic]";
        }
    if (all3.mean_psnr < unguided.mean_psnr) {
        res.passed = false;
        d << " [all3 < unguided]";
    }
    if (!(vis_df.mean_visual_loss < unguided.mean_visual_loss)) {
        res.passed = false;
        d << " [visual guidance did not reduce visual_loss]";
    }
    res.details = d.str();
    return res;
}

// ---------------------------------------------------------- criterion 8

CheckResult check_ablation(const std::string& scratch, const E2eShared& shared) {
    CheckResult res{"ablation_harness", true, 0.0, ""};
    const std::string dir = (fs::path(scratch) / "ablation").string();
    fs::remove_all(dir);
    ExperimentConfig cfg = e2e_config(dir);
    cfg.guidance = {{"visual", kRhoVisual, "hr", "grad_in_noise"},
                    {"perceptual", kRhoPerceptual, "hr", "grad_in_noise"}};

    const AblationResult ab = run_ablation(cfg, shared.checkpoint);
    if (ab.rows.size() != 6) {
        res.passed = false;
        res.details = "expected 6 rows, got " + std::to_string(ab.rows.size());
        return res;
    }
    for (const AblationRow& row : ab.rows)
        if (row.seed != cfg.seed) {
            res.passed = false;
            res.details += "seed column mismatch in cell " + row.cell + "; ";
        }
    auto find = [&](const std::string& cell) -> const AblationRow& {
        for (const AblationRow& r : ab.rows)
            if (r.cell == cell) return r;
        throw std::runtime_error("missing ablation cell " + cell);
    };
    const double gin = find("grad_in_noise").psnr;
    const double lit = find("loss_in_training").psnr;
    std::ostringstream d;
    d << "none=" << fmtd(find("none").psnr, "%.2f")
      << " visual=" << fmtd(find("visual").psnr, "%.2f")
      << " perceptual=" << fmtd(find("perceptual").psnr, "%.2f")
      << " both=" << fmtd(find("both").psnr, "%.2f")
      << " | injection: grad_in_noise=" << fmtd(gin, "%.2f")
      << " loss_in_training=" << fmtd(lit, "%.2f")
      << (gin >= lit ? " (matches the expected direction)"
                     : " (direction did not replicate at toy scale; recorded)");
    res.details = d.str();
    return res;
}

// ---------------------------------------------------------- criterion 9

CheckResult check_dual_impl() {
    CheckResult res{"dual_impl_oracles", true, 0.0, ""};
    Rng rng(60601);
    double worst = 0.0;

    for (int i = 0; i < 3; ++i) {
        const ImageGrid hr = random_grid(rng, 8, 8, 0.0, 1.0);
        const ImageGrid sr = random_grid(rng, 8, 8, 0.0, 1.0);
        worst = std::max(worst, std::abs(visual_loss(hr, sr) -
                                         spectral_loss_transcription(hr, sr)));
        FeatureExtractorSpec spec;
        spec.seed = 9000 + i;
        const FeatureExtractor fe(spec);
        const SoftSegmenter seg = SoftSegmenter::uniform(4, 0.05);
        worst = std::max(worst,
                         std::abs(perceptual_loss(hr, sr, fe, seg) -
                                  perceptual_loss_transcription(hr, sr, fe, seg)));
    }
    for (int i = 0; i < 3; ++i) {
        const ImageGrid a = random_grid(rng, 16, 16, 0.0, 1.0);
        ImageGrid b = a;
        for (size_t k = 0; k < b.size(); ++k) b[k] += 0.05 * rng.normal();
        worst = std::max(worst, std::abs(ssim(a, b) - ssim_transcription(a, b)));
    }
    res.passed = worst < 1e-10;
    res.details = "max |library - transcription| = " + fmtd(worst);
    return res;
}

// --------------------------------------------------------- criterion 10

CheckResult check_adjoint() {
    CheckResult res{"adjoint", true, 0.0, ""};
    Rng rng(424242);
    double worst = 0.0;
    struct Cfg {
        int scale, ksize;
        double sigma;
    };
    for (const Cfg c : {Cfg{4, 5, 1.0}, Cfg{2, 3, 0.6}, Cfg{1, 7, 1.5}}) {
        const DegradationModel d = DegradationModel::gaussian(c.scale, c.sigma, c.ksize);
        for (int i = 0; i < 50; ++i) {
            const ImageGrid x = rng.normal_grid(16, 16);
            const ImageGrid y = rng.normal_grid(16 / c.scale, 16 / c.scale);
            const double lhs = dot(degrade(x, d), y);
            const double rhs = dot(x, degrade_adjoint(y, d));
            worst = std::max(worst, std::abs(lhs - rhs) /
                                        std::max({1.0, std::abs(lhs), std::abs(rhs)}));
        }
    }
    res.passed = worst < 1e-10;
    res.details = "3 kernel/scale configs x 50 pairs, max rel gap " + fmtd(worst);
    return res;
}

// ------------------------------------------------------------ self-test

CheckResult check_selftest() {
    CheckResult res{"selftest_corrupted_gradient", true, 0.0, ""};
    Rng rng(31337);
    const ImageGrid target = random_grid(rng, 8, 8, 0.0, 1.0);
    const ImageGrid x = random_grid(rng, 8, 8, 0.0, 1.0);
    GuidanceTerm bad = make_identity_term(target, 1.0, "corrupted");
    auto good_grad = bad.gradient;
    bad.gradient = [good_grad](const ImageGrid& g) {
        return scale(good_grad(g), 1.1);  // deliberate 10% corruption
    };
    const double err = fd_rel_error(bad.loss, bad.gradient(x), x);
    res.passed = err > 1e-4;  // the harness must flag this
    res.details = res.passed
                      ? "corrupted gradient correctly rejected (rel=" + fmtd(err) + ")"
                      : "corrupted gradient slipped through";
    return res;
}

}  // namespace

std::vector<CheckResult> run_verification(const std::string& scratch_dir,
                                          std::ostream& log, bool include_slow) {
    fs::create_directories(scratch_dir);
    std::vector<CheckResult> results;
    E2eShared shared;

    using Clock = std::chrono::steady_clock;
    auto run = [&](const std::string& name, auto&& fn, double budget_s = 0.0) {
        const auto start = Clock::now();
        CheckResult r;
        try {
            r = fn();
        } catch (const std::exception& e) {
            r.name = name;
            r.passed = false;
            r.details = std::string("exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
        if (budget_s > 0.0 && r.seconds > budget_s) {
            r.passed = false;
            r.details += " [over time budget " + fmtd(budget_s, "%.0f") + "s]";
        }
        log << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << " ("
            << fmtd(r.seconds, "%.2f") << "s) " << r.details << "\n"
            << std::flush;
        results.push_back(std::move(r));
    };

    run("gradient_oracles", check_gradient_oracles, 120.0);
    run("analytic_sampler", check_analytic_sampler, 120.0);
    run("guidance_efficacy", check_guidance_efficacy);
    run("spectral_invariants", check_spectral_invariants);
    run("algebraic_identities", check_algebraic_identities);
    run("dual_impl_oracles", check_dual_impl);
    run("adjoint", check_adjoint);
    run("selftest_corrupted_gradient", check_selftest);
    if (include_slow) {
        run("determinism", [&] { return check_determinism(scratch_dir); });
        run("end_to_end_sr", [&] { return check_end_to_end_sr(scratch_dir, shared); },
            1200.0);
        run("ablation_harness", [&] { return check_ablation(scratch_dir, shared); });
    }
    return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
    for (const CheckResult& r : results)
        if (!r.passed) return false;
    return true;
}

}  // namespace gdsr
