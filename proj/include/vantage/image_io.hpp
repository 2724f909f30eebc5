#pragma once

#include <filesystem>

#include "vantage/image.hpp"

namespace vantage {

/// Write an 8-bit RGB PNG. Channel values are clamped to [0, 1] and rounded.
/// Output bytes are deterministic for identical input.
void write_png(const std::filesystem::path& path, const ImageRGB& image);

/// Encode to an in-memory PNG byte stream.
std::vector<std::uint8_t> encode_png(const ImageRGB& image);

/// Read an 8-bit PNG (gray, RGB, or RGBA; no interlace) into a float RGB image.
ImageRGB read_png(const std::filesystem::path& path);

/// Depth image as a grayscale PNG, normalized to the max finite depth.
void write_depth_png(const std::filesystem::path& path, const ImageDepth& depth);

} // namespace vantage
