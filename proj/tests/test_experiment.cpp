#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gdsr/experiment.hpp"
#include "gdsr/image_io.hpp"
#include "gdsr/rng.hpp"

using namespace gdsr;
namespace fs = std::filesystem;

namespace {

const char* kMinimalConfig = R"({
  "seed": 5,
  "schedule": {"kind": "linear", "T": 120, "beta_min": 1e-4, "beta_max": 0.02},
  "sampler": {"num_steps": 10, "eta": 0.0, "init": "lr_plus_noise"},
  "model": {"hidden_channels": 6, "num_hidden_layers": 1},
  "degradation": {"scale": 4, "blur_std": 1.0, "kernel_size": 5},
  "dataset": {"source": "synthetic", "count": 2, "size": 32, "holdout": 2},
  "training": {"iterations": 60, "learning_rate": 0.02},
  "guidance": [
    {"type": "data_fidelity", "rho": 1.0},
    {"type": "visual", "rho": 1.0, "reference": "hr"}
  ],
  "output_dir": "OUTDIR"
})";

std::string config_with_outdir(const std::string& dir) {
    std::string s = kMinimalConfig;
    s.replace(s.find("OUTDIR"), 6, dir);
    return s;
}

std::string scratch_dir(const std::string& leaf) {
    const fs::path p = fs::temp_directory_path() / ("gdsr_exp_" + leaf);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

int count_lines(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    int n = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

}  // namespace

TEST_CASE("config parsing accepts the documented schema") {
    ExperimentConfig cfg = parse_config_text(config_with_outdir("/tmp/x"));
    CHECK(cfg.seed == 5);
    CHECK(cfg.T == 120);
    CHECK(cfg.num_steps == 10);
    CHECK(cfg.guidance.size() == 2);
    CHECK(cfg.guidance[0].type == "data_fidelity");
    CHECK(cfg.guidance[1].reference == "hr");
}

TEST_CASE("unknown keys are rejected everywhere") {
    CHECK_THROWS_WITH_AS(parse_config_text(R"({"seeed": 1})"),
                         doctest::Contains("unknown key"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        parse_config_text(R"({"schedule": {"kind": "linear", "tmax": 10}})"),
        doctest::Contains("unknown key"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        parse_config_text(R"({"guidance": [{"type": "visual", "rhoo": 2}]})"),
        doctest::Contains("unknown key"), std::invalid_argument);
}

TEST_CASE("invalid values are rejected before any compute") {
    CHECK_THROWS_AS(parse_config_text(R"({"sampler": {"eta": 1.5}})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text(R"({"schedule": {"beta_min": 0.0}})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text(R"({"guidance": [{"type": "psychic"}]})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        parse_config_text(R"({"dataset": {"source": "directory", "path": ""}})"),
        std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("not json"), std::invalid_argument);
    // missing dataset path fails at parse, before training starts
    CHECK_THROWS_AS(
        parse_config_text(
            R"({"dataset": {"source": "directory", "path": "/nonexistent_dir_xyz"}, "training": {"iterations": 5}})"),
        std::invalid_argument);
}

TEST_CASE("config hash is stable and sensitive") {
    ExperimentConfig a = parse_config_text(config_with_outdir("/tmp/x"));
    ExperimentConfig b = parse_config_text(config_with_outdir("/tmp/x"));
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 6;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("train then sr produce the documented artifacts") {
    const std::string dir = scratch_dir("pipeline");
    ExperimentConfig cfg = parse_config_text(config_with_outdir(dir));

    TrainResult tr = run_train(cfg);
    CHECK(fs::exists(tr.checkpoint_path));
    CHECK(fs::exists(tr.trace_csv_path));
    CHECK(fs::exists(fs::path(dir) / "manifest.json"));
    CHECK(count_lines(tr.trace_csv_path) == 61);  // header + one per iteration

    SrResult sr = run_sr(cfg, tr.checkpoint_path, /*write_trajectories=*/true);
    CHECK(sr.images.size() == 2);
    CHECK(sr.label == "data_fidelity+visual");
    CHECK(fs::exists(sr.metrics_csv_path));
    // header + 2 image rows + aggregate
    CHECK(count_lines(sr.metrics_csv_path) == 4);
    std::ifstream in(sr.metrics_csv_path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "id,label,psnr,ssim,visual_loss");

    for (const auto& img : sr.images) {
        CHECK(fs::exists(fs::path(dir) / (img.id + "_sr.pgm")));
        CHECK(fs::exists(fs::path(dir) / (img.id + "_trajectory.csv")));
        CHECK(img.psnr > 0.0);
        CHECK(img.ssim <= 1.0);
    }

    // trajectory dump has the per-term columns
    std::ifstream traj(fs::path(dir) / (sr.images[0].id + "_trajectory.csv"));
    std::string thead;
    std::getline(traj, thead);
    CHECK(thead ==
          "step,loss_data_fidelity,grad_rms_data_fidelity,loss_visual,grad_rms_visual");
}

TEST_CASE("unguided run is labeled unguided") {
    const std::string dir = scratch_dir("unguided");
    ExperimentConfig cfg = parse_config_text(config_with_outdir(dir));
    cfg.guidance.clear();
    TrainResult tr = run_train(cfg);
    SrResult sr = run_sr(cfg, tr.checkpoint_path);
    CHECK(sr.label == "unguided");
}

TEST_CASE("checkpoint architecture mismatches are caught") {
    const std::string dir = scratch_dir("mismatch");
    ExperimentConfig cfg = parse_config_text(config_with_outdir(dir));
    TrainResult tr = run_train(cfg);
    ExperimentConfig other = cfg;
    other.hidden_channels = 12;
    CHECK_THROWS_WITH_AS(run_sr(other, tr.checkpoint_path),
                         doctest::Contains("architecture mismatch"),
                         std::invalid_argument);
}

TEST_CASE("directory datasets are ingested and degraded") {
    const std::string dir = scratch_dir("dirdata");
    const std::string imgdir = dir + "/images";
    fs::create_directories(imgdir);
    Rng rng(9);
    for (int i = 0; i < 2; ++i) {
        ImageGrid img(32, 32);
        for (size_t k = 0; k < img.size(); ++k) img[k] = rng.uniform();
        write_image(img, imgdir + "/img" + std::to_string(i) + ".pgm");
    }
    ExperimentConfig cfg = parse_config_text(config_with_outdir(dir));
    cfg.dataset_source = "directory";
    cfg.dataset_path = imgdir;
    ExperimentData data = prepare_data(cfg);
    CHECK(data.train.size() == 2);
    CHECK(data.eval.size() == 2);
    CHECK(data.eval[0].lr.height() == 8);
    CHECK(data.eval[0].cond.height() == 32);
}

#ifdef GDSR_CLI_PATH
TEST_CASE("CLI exit codes: 0 success, 2 usage/config error") {
    const std::string dir = scratch_dir("cli");
    const std::string cfg_path = dir + "/cfg.json";
    {
        std::ofstream out(cfg_path);
        out << config_with_outdir(dir + "/out");
    }
    const std::string cli = GDSR_CLI_PATH;

    // no subcommand -> usage error
    CHECK(std::system((cli + " >/dev/null 2>&1").c_str()) != 0);

    // bad config -> exit 2
    {
        std::ofstream out(dir + "/bad.json");
        out << R"({"unknown_top": 1})";
    }
    int rc = std::system(
        (cli + " train --config " + dir + "/bad.json >/dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(rc) == 2);

    // good train -> exit 0
    rc = std::system((cli + " train --config " + cfg_path + " >/dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(rc) == 0);

    // sr against the produced checkpoint -> exit 0
    rc = std::system((cli + " sr --config " + cfg_path + " --checkpoint " + dir +
                      "/out/denoiser.ckpt.json >/dev/null 2>&1")
                         .c_str());
    CHECK(WEXITSTATUS(rc) == 0);

    // missing checkpoint file -> failure, not success
    rc = std::system((cli + " sr --config " + cfg_path + " --checkpoint " + dir +
                      "/out/nope.json >/dev/null 2>&1")
                         .c_str());
    CHECK(WEXITSTATUS(rc) != 0);
}
#endif
