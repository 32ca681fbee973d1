#include "gdsr/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace gdsr {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json dump_kernels(const std::vector<ConvKernel>& kernels) {
    json tensors = json::object();
    for (size_t i = 0; i < kernels.size(); ++i) {
        const std::string base = "conv" + std::to_string(i);
        tensors[base + ".w"] = kernels[i].w;
        if (!kernels[i].b.empty()) tensors[base + ".b"] = kernels[i].b;
    }
    return tensors;
}

void load_kernels(const json& tensors, std::vector<ConvKernel>& kernels) {
    for (size_t i = 0; i < kernels.size(); ++i) {
        const std::string base = "conv" + std::to_string(i);
        const auto w = tensors.at(base + ".w").get<std::vector<double>>();
        if (w.size() != kernels[i].w.size())
            throw std::runtime_error("corrupt header: tensor size mismatch at " + base);
        kernels[i].w = w;
        if (!kernels[i].b.empty()) {
            const auto b = tensors.at(base + ".b").get<std::vector<double>>();
            if (b.size() != kernels[i].b.size())
                throw std::runtime_error("corrupt header: tensor size mismatch at " + base);
            kernels[i].b = b;
        }
    }
}

json read_container(const std::string& path, const std::string& kind) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("io failure: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception&) {
        throw std::runtime_error("corrupt header: not a valid container");
    }
    if (!j.contains("format_version") || j["format_version"].get<int>() != kFormatVersion)
        throw std::runtime_error("corrupt header: unsupported format_version");
    if (!j.contains("kind") || j["kind"].get<std::string>() != kind)
        throw std::runtime_error("corrupt header: container kind is not " + kind);
    return j;
}

void write_container(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("io failure: cannot open " + path);
    out << j.dump(1) << "\n";
    if (!out) throw std::runtime_error("io failure: write " + path);
}

}  // namespace

void save_denoiser(const ConvDenoiser& model, const std::string& path) {
    const ConvDenoiserArch& a = model.arch();
    json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "conv_denoiser";
    j["arch"] = {{"hidden_channels", a.hidden_channels},
                 {"num_hidden_layers", a.num_hidden_layers},
                 {"kernel_size", a.kernel_size},
                 {"time_embed_dim", a.time_embed_dim},
                 {"conditioned", a.conditioned}};
    json tensors = dump_kernels(model.kernels());
    tensors["time.w"] = model.time_weight();
    tensors["time.b"] = model.time_bias();
    tensors["skip.w"] = model.skip_weight();
    tensors["skip.b"] = model.skip_bias();
    j["tensors"] = std::move(tensors);
    write_container(j, path);
}

ConvDenoiser load_denoiser(const std::string& path) {
    const json j = read_container(path, "conv_denoiser");
    const json& a = j.at("arch");
    ConvDenoiserArch arch;
    arch.hidden_channels = a.at("hidden_channels").get<int>();
    arch.num_hidden_layers = a.at("num_hidden_layers").get<int>();
    arch.kernel_size = a.at("kernel_size").get<int>();
    arch.time_embed_dim = a.at("time_embed_dim").get<int>();
    arch.conditioned = a.at("conditioned").get<bool>();
    ConvDenoiser model(arch, /*init_seed=*/0);
    const json& tensors = j.at("tensors");
    load_kernels(tensors, model.kernels());
    auto tw = tensors.at("time.w").get<std::vector<double>>();
    auto tb = tensors.at("time.b").get<std::vector<double>>();
    if (tw.size() != model.time_weight().size() || tb.size() != model.time_bias().size())
        throw std::runtime_error("corrupt header: time embedding size mismatch");
    model.time_weight() = std::move(tw);
    model.time_bias() = std::move(tb);
    auto sw = tensors.at("skip.w").get<std::vector<double>>();
    auto sb = tensors.at("skip.b").get<std::vector<double>>();
    if (sw.size() != model.skip_weight().size() || sb.size() != model.skip_bias().size())
        throw std::runtime_error("corrupt header: skip gain size mismatch");
    model.skip_weight() = std::move(sw);
    model.skip_bias() = std::move(sb);
    return model;
}

void save_extractor(const FeatureExtractor& fe, const std::string& path) {
    const FeatureExtractorSpec& s = fe.spec();
    json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "feature_extractor";
    j["arch"] = {{"channels", s.channels},
                 {"kernel_size", s.kernel_size},
                 {"seed", s.seed},
                 {"tap_layer", s.tap_layer}};
    j["tensors"] = dump_kernels(fe.kernels());
    write_container(j, path);
}

FeatureExtractor load_extractor(const std::string& path) {
    const json j = read_container(path, "feature_extractor");
    const json& a = j.at("arch");
    FeatureExtractorSpec spec;
    spec.channels = a.at("channels").get<std::vector<int>>();
    spec.kernel_size = a.at("kernel_size").get<int>();
    spec.seed = a.at("seed").get<uint64_t>();
    spec.tap_layer = a.at("tap_layer").get<int>();
    FeatureExtractor fe(spec);
    std::vector<ConvKernel> kernels = fe.kernels();
    load_kernels(j.at("tensors"), kernels);
    fe.set_kernels(std::move(kernels));
    return fe;
}

}  // namespace gdsr
