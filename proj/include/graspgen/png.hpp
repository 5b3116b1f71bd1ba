// Minimal dependency-free PNG writer (stored deflate blocks) for the preview
// subcommand. Not a general-purpose encoder.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace graspgen {

// 8-bit grayscale, row-major.
void write_png_gray(const std::string& path, const std::vector<std::uint8_t>& pixels, int width,
                    int height);

// 8-bit RGB, interleaved row-major.
void write_png_rgb(const std::string& path, const std::vector<std::uint8_t>& pixels, int width,
                   int height);

}  // namespace graspgen
