#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "bgg/tensor.hpp"

namespace bgg {

/// 8-bit interleaved image (1 or 3 channels).
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> pixels;

  static Image blank(std::size_t height, std::size_t width, std::size_t channels = 3);
  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
  bool operator==(const Image&) const = default;
};

/// Binary PPM (P6, maxval 255). Throws IoError.
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);
/// Binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, const Image& image);
Image read_pgm(const std::filesystem::path& path);

/// [C x H x W] tensor with values in [lo, hi] mapped linearly to 0..255.
/// Values are clamped and rounded to nearest.
Image tensor_to_image(const Tensor& t, double lo, double hi);
/// 0..255 mapped linearly to [lo, hi]; returns C x H x W.
Tensor image_to_tensor(const Image& image, double lo, double hi, DType dtype = default_dtype());

/// Side-by-side concatenation of equally sized images (converted to 3 channels).
Image hconcat(const std::vector<Image>& images);

}  // namespace bgg
