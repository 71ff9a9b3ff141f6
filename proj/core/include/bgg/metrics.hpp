#pragma once

// Pixel-level image quality: SSIM, Mask-SSIM and PSNR for range-1 images.
//
// SSIM is single-scale with an 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range 1, evaluated on valid window positions
// only and averaged over channels. Both images must be at least 11x11.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "bgg/tensor.hpp"

namespace bgg {

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kPsnrCeiling = 100.0;

double ssim(const Tensor& a, const Tensor& b);

/// SSIM of (a * mask, b * mask). An all-zero mask compares two zero images
/// and therefore yields exactly 1.
double masked_ssim(const Tensor& a, const Tensor& b, const Tensor& mask);

/// 10 log10(1 / MSE), clamped to kPsnrCeiling (identical images included).
double psnr(const Tensor& a, const Tensor& b);
double mse(const Tensor& a, const Tensor& b);

struct ImageMetrics {
  std::string name;
  double ssim = 0.0;
  double mask_ssim = 0.0;
  double psnr = 0.0;
};

struct MetricReport {
  std::vector<ImageMetrics> images;

  void add(ImageMetrics m) { images.push_back(std::move(m)); }
  std::size_t count() const { return images.size(); }
  double mean_ssim() const;
  double mean_mask_ssim() const;
  double mean_psnr() const;

  /// "metric\tvalue" lines: count, ssim, mask_ssim, psnr.
  std::string summary_text() const;
  /// "name\tssim\tmask_ssim\tpsnr" per image, with a header line.
  std::string per_image_text() const;
  std::string to_json() const;
  void write(const std::filesystem::path& dir, const std::string& note = {}) const;
};

}  // namespace bgg
