#pragma once

#include "urcod/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace urcod {

/// Raw 8-bit image, row-major, ch interleaved (1 = gray, 3 = rgb).
struct ImageU8 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
};

ImageU8 read_png(const std::filesystem::path& path);

void write_png_gray(const std::filesystem::path& path, const ProbMap& map);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& image);

/// Scales 8-bit values to [0,1]. Requires a single-channel input.
ProbMap to_prob_map(const ImageU8& img);
/// Scales 8-bit values to [0,1]. Requires a three-channel input.
RgbImage to_rgb_image(const ImageU8& img);

}  // namespace urcod
