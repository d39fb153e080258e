#pragma once

#include <filesystem>

#include "bphila/tensor.hpp"

namespace bphila::io {

// Reads PGM/PPM (P2, P3, P5, P6; 8- or 16-bit) or PNG (gray, gray+alpha, RGB,
// RGBA; 8- or 16-bit; alpha dropped). Values are mapped to [0, 1].
ImageTensor read_image(const std::filesystem::path& path);

// Format picked from the extension: .png, .pgm (1 channel) or .ppm (3
// channels). Values are clamped to [0, 1] and quantized to `bit_depth` (8 or 16).
void write_image(const std::filesystem::path& path, const ImageTensor& x, int bit_depth = 8);

}  // namespace bphila::io
