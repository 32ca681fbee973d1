#pragma once

#include <string>

#include "gdsr/grid.hpp"

namespace gdsr {

/// Reads binary PGM (P5, 8 or 16 bit) or grayscale PNG into [0,1] floats
/// (value / maxval). Throws "unsupported format", "corrupt header" or
/// "io failure".
ImageGrid read_image(const std::string& path);

/// Writes 16-bit binary PGM (big-endian sample order, per the format).
/// Values are clamped to [0,1] and quantized to 0..65535.
void write_image(const ImageGrid& img, const std::string& path);

}  // namespace gdsr
