#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gdsr/experiment.hpp"
#include "gdsr/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;

gdsr::ExperimentConfig load_config(const std::string& config_path,
                                   const std::string& out_override,
                                   long long seed_override) {
    gdsr::ExperimentConfig cfg = gdsr::parse_config_file(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Guided-diffusion super-resolution experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint;
    long long seed = -1;
    bool trajectories = false;

    CLI::App* train = app.add_subcommand("train", "Train the conv denoiser");
    train->add_option("--config", config_path, "Experiment config (JSON)")->required();
    train->add_option("--seed", seed, "Override the config seed");
    train->add_option("--out", out_dir, "Override the output directory");

    CLI::App* sr = app.add_subcommand("sr", "Guided super-resolution runs");
    sr->add_option("--config", config_path, "Experiment config (JSON)")->required();
    sr->add_option("--checkpoint", checkpoint, "Denoiser checkpoint")->required();
    sr->add_option("--seed", seed, "Override the config seed");
    sr->add_option("--out", out_dir, "Override the output directory");
    sr->add_flag("--trajectories", trajectories, "Write per-step trajectory CSVs");

    CLI::App* ablate = app.add_subcommand("ablate", "Guidance ablation matrix");
    ablate->add_option("--config", config_path, "Experiment config (JSON)")->required();
    ablate->add_option("--checkpoint", checkpoint,
                       "Base checkpoint (trained when omitted)");
    ablate->add_option("--seed", seed, "Override the config seed");
    ablate->add_option("--out", out_dir, "Override the output directory");

    CLI::App* verify = app.add_subcommand("verify", "Run the release-gate checks");
    verify->add_option("--out", out_dir, "Scratch directory for check outputs");
    bool fast = false;
    verify->add_flag("--fast", fast, "Skip the training-scale checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints usage/help
        return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train->parsed()) {
            const auto cfg = load_config(config_path, out_dir, seed);
            const auto res = gdsr::run_train(cfg);
            std::cout << "checkpoint: " << res.checkpoint_path << "\n"
                      << "loss trace: " << res.trace_csv_path << "\n"
                      << "loss: " << res.initial_loss << " -> " << res.final_loss
                      << "\n";
        } else if (sr->parsed()) {
            const auto cfg = load_config(config_path, out_dir, seed);
            const auto res = gdsr::run_sr(cfg, checkpoint, trajectories);
            std::cout << "metrics: " << res.metrics_csv_path << "\n"
                      << "label: " << res.label << "  mean psnr " << res.mean_psnr
                      << "  ssim " << res.mean_ssim << "  visual_loss "
                      << res.mean_visual_loss << "\n";
        } else if (ablate->parsed()) {
            const auto cfg = load_config(config_path, out_dir, seed);
            const auto res = gdsr::run_ablation(cfg, checkpoint);
            std::cout << "ablation: " << res.csv_path << "\n";
            for (const auto& row : res.rows)
                std::cout << "  " << row.cell << ": psnr " << row.psnr << " ssim "
                          << row.ssim << " visual_loss " << row.visual_loss << "\n";
        } else if (verify->parsed()) {
            const std::string scratch = out_dir.empty() ? "verify_scratch" : out_dir;
            const auto results = gdsr::run_verification(scratch, std::cout, !fast);
            if (!gdsr::all_passed(results)) return kExitCheckFailure;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;  // config/usage problems
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailure;
    }
    return kExitOk;
}
