#pragma once

#include <string>

#include "gdsr/denoiser.hpp"
#include "gdsr/perceptual.hpp"

namespace gdsr {

/// Versioned JSON containers holding an architecture block plus named
/// weight tensors. Doubles are serialized with shortest-round-trip
/// formatting, so save -> load reproduces predictions bit-exactly.
void save_denoiser(const ConvDenoiser& model, const std::string& path);
ConvDenoiser load_denoiser(const std::string& path);

void save_extractor(const FeatureExtractor& fe, const std::string& path);
FeatureExtractor load_extractor(const std::string& path);

}  // namespace gdsr
