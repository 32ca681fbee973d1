#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gdsr/degrade.hpp"
#include "gdsr/denoiser.hpp"
#include "gdsr/guidance.hpp"
#include "gdsr/perceptual.hpp"
#include "gdsr/sampler.hpp"

namespace gdsr {

/// One guidance entry from the experiment config. visual/perceptual
/// terms compare against `reference`: "hr" (ground-truth reference, the
/// form the losses are defined in) or "bicubic" (upsampled LR proxy for
/// blind runs). Injection "grad_in_noise" applies the term at sampling;
/// "loss_in_training" adds its loss to the training objective instead.
struct GuidanceSpec {
    std::string type;  // visual | perceptual | data_fidelity
    double rho = 1.0;
    std::string reference = "hr";
    std::string injection = "grad_in_noise";
};

struct ExperimentConfig {
    uint64_t seed = 0;

    std::string schedule_kind = "linear";
    int T = 1000;
    double beta_min = 1e-4;
    double beta_max = 0.02;

    int num_steps = 50;
    double eta = 0.0;
    std::string init_mode = "lr_plus_noise";  // pure_noise | lr_plus_noise
    bool clamp_output = true;

    // shared guidance policy
    int t_start = 0;  // 0 = schedule T
    int t_end = 1;
    double clip_threshold = 1.0;
    std::string jacobian_mode = "through_denoiser";  // | x0_detached
    std::string rho_decay = "constant";              // | sqrt_one_minus_alpha_bar

    int hidden_channels = 16;
    int num_hidden_layers = 1;
    int time_embed_dim = 16;
    bool conditioned = true;

    int scale = 4;
    double blur_std = 1.0;
    int kernel_size = 5;
    double noise_std = 0.0;

    std::string dataset_source = "synthetic";  // synthetic | directory
    int dataset_count = 32;
    int dataset_size = 64;
    int dataset_holdout = 16;
    std::string dataset_path;

    int iterations = 2000;
    double learning_rate = 0.01;
    double momentum = 0.9;
    int finetune_iterations = 500;

    std::vector<int> extractor_channels = {1, 8, 16, 16};
    uint64_t extractor_seed = 7;
    std::string extractor_weights;  // optional container path
    int segment_classes = 4;
    double segment_temperature = 0.05;

    std::vector<GuidanceSpec> guidance;
    std::string output_dir = "out";
};

/// Strict parse: unknown keys anywhere are rejected, every value is
/// validated before any compute.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

/// FNV-1a over the canonical serialized form; stored in run manifests.
uint64_t config_hash(const ExperimentConfig& cfg);

NoiseSchedule make_schedule(const ExperimentConfig& cfg);
DegradationModel make_degradation(const ExperimentConfig& cfg);
GuidancePolicy make_policy(const ExperimentConfig& cfg);
FeatureExtractor make_extractor(const ExperimentConfig& cfg);
SoftSegmenter make_segmenter(const ExperimentConfig& cfg);

/// HR image, its degraded LR, and the bicubic-upsampled conditioning.
struct EvalItem {
    std::string id;
    ImageGrid hr;
    ImageGrid lr;
    ImageGrid cond;
};

struct ExperimentData {
    std::vector<TrainSample> train;
    std::vector<EvalItem> eval;
};

/// Deterministic dataset assembly (synthetic generation or directory
/// ingestion) plus degradation.
ExperimentData prepare_data(const ExperimentConfig& cfg);

/// Builds the sampling-time guidance terms for one eval item; entries
/// with injection == "loss_in_training" are skipped here.
std::vector<GuidanceTerm> build_guidance_terms(const ExperimentConfig& cfg,
                                               const EvalItem& item,
                                               const FeatureExtractor& fe,
                                               const SoftSegmenter& seg);

struct TrainResult {
    std::string checkpoint_path;
    std::string trace_csv_path;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};
TrainResult run_train(const ExperimentConfig& cfg);

struct SrImageResult {
    std::string id;
    double psnr = 0.0;
    double ssim = 0.0;
    double visual_loss = 0.0;
};
struct SrResult {
    std::string metrics_csv_path;
    std::vector<SrImageResult> images;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_visual_loss = 0.0;
    std::string label;
};
SrResult run_sr(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                bool write_trajectories = false);

struct AblationRow {
    std::string cell;
    uint64_t seed = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double visual_loss = 0.0;
};
struct AblationResult {
    std::string csv_path;
    std::vector<AblationRow> rows;
};
/// The 4-cell guidance matrix {none, visual, perceptual, both} plus the
/// injection comparison {sum_loss, grad_in_noise} at a shared fine-tune
/// budget, all with shared seeds. Trains a base model first when
/// checkpoint_path is empty.
AblationResult run_ablation(const ExperimentConfig& cfg,
                            std::string checkpoint_path = "");

void write_manifest(const ExperimentConfig& cfg, const std::string& command);

}  // namespace gdsr
