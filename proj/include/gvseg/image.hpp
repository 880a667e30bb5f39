#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "gvseg/tensor.hpp"

namespace gvseg {

using Rgb = std::array<std::uint8_t, 3>;

// Interleaved 8-bit RGB image, row-major.
struct ImageU8 {
  Index width = 0;
  Index height = 0;
  std::vector<std::uint8_t> rgb;  // 3 * width * height bytes

  ImageU8() = default;
  ImageU8(Index height_, Index width_)
      : width(width_), height(height_),
        rgb(static_cast<std::size_t>(3 * width_ * height_), 0) {}

  Rgb at(Index h, Index w) const {
    const std::size_t o = static_cast<std::size_t>(3 * (h * width + w));
    return {rgb[o], rgb[o + 1], rgb[o + 2]};
  }
  void set(Index h, Index w, Rgb color) {
    const std::size_t o = static_cast<std::size_t>(3 * (h * width + w));
    rgb[o] = color[0];
    rgb[o + 1] = color[1];
    rgb[o + 2] = color[2];
  }
};

// Strict 8-bit RGB PNG codec; any other bit depth or color type is rejected.
ImageU8 read_png_rgb8(const std::filesystem::path& path);
void write_png_rgb8(const std::filesystem::path& path, const ImageU8& image);

// RGB/255 normalization used for network input; recorded in checkpoints.
Tensor3d to_unit_tensor(const ImageU8& image);
ImageU8 to_image_u8(const Tensor3d& tensor);

}  // namespace gvseg
