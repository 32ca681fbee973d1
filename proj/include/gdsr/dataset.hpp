#pragma once

#include <vector>

#include "gdsr/grid.hpp"
#include "gdsr/rng.hpp"

namespace gdsr {

/// Synthetic thermal-style scenes: smooth low-frequency backgrounds from
/// summed Gaussian blobs (heat sources) overlaid with sharp rectangles
/// and bars (vehicle/pedestrian-like foreground), min-max normalized to
/// [0,1]. Deterministic in the rng state.
std::vector<ImageGrid> synth_thermal_dataset(int n, int size, Rng& rng);

}  // namespace gdsr
