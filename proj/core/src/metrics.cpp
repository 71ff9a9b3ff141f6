#include "bgg/metrics.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "bgg/errors.hpp"

namespace bgg {
namespace {

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double total = 0.0;
  const double centre = (kSsimWindow - 1) / 2.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = i - centre;
    w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// Separable valid-mode filter of one plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::array<double, kSsimWindow>& g) {
  const std::size_t oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) acc += g[k] * plane[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) acc += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

void check_images(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  if (a.rank() != 3) throw ShapeError(std::string(what) + ": expected C x H x W");
}

double ssim_values(const std::vector<double>& a, const std::vector<double>& b, std::size_t c,
                   std::size_t h, std::size_t w) {
  if (h < kSsimWindow || w < kSsimWindow) throw ShapeError("ssim: images smaller than the 11x11 window");
  static const auto g = gaussian_window();
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const std::size_t plane = h * w;
  double total = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::vector<double> x(a.begin() + ch * plane, a.begin() + (ch + 1) * plane);
    std::vector<double> y(b.begin() + ch * plane, b.begin() + (ch + 1) * plane);
    std::vector<double> xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, g), my = filter_valid(y, h, w, g);
    const auto sxx = filter_valid(xx, h, w, g), syy = filter_valid(yy, h, w, g),
               sxy = filter_valid(xy, h, w, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(c);
}

template <class F>
double mean_of(const std::vector<ImageMetrics>& v, F field) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& m : v) acc += field(m);
  return acc / static_cast<double>(v.size());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
  check_images(a, b, "ssim");
  return ssim_values(a.to_vector(), b.to_vector(), a.dim(0), a.dim(1), a.dim(2));
}

double masked_ssim(const Tensor& a, const Tensor& b, const Tensor& mask) {
  check_images(a, b, "masked_ssim");
  if (mask.rank() != 3 || mask.dim(0) != 1 || mask.dim(1) != a.dim(1) || mask.dim(2) != a.dim(2)) {
    throw ShapeError("masked_ssim: mask must be 1 x H x W");
  }
  auto va = a.to_vector(), vb = b.to_vector();
  const auto m = mask.to_vector();
  const std::size_t plane = m.size();
  for (std::size_t i = 0; i < va.size(); ++i) {
    va[i] *= m[i % plane];
    vb[i] *= m[i % plane];
  }
  return ssim_values(va, vb, a.dim(0), a.dim(1), a.dim(2));
}

double mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("mse: shape mismatch");
  const auto va = a.to_vector(), vb = b.to_vector();
  double acc = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) acc += (va[i] - vb[i]) * (va[i] - vb[i]);
  return acc / static_cast<double>(va.size());
}

double psnr(const Tensor& a, const Tensor& b) {
  const double e = mse(a, b);
  if (e <= 0.0) return kPsnrCeiling;
  return std::min(kPsnrCeiling, 10.0 * std::log10(1.0 / e));
}

double MetricReport::mean_ssim() const {
  return mean_of(images, [](const ImageMetrics& m) { return m.ssim; });
}
double MetricReport::mean_mask_ssim() const {
  return mean_of(images, [](const ImageMetrics& m) { return m.mask_ssim; });
}
double MetricReport::mean_psnr() const {
  return mean_of(images, [](const ImageMetrics& m) { return m.psnr; });
}

std::string MetricReport::summary_text() const {
  std::ostringstream out;
  out << "count\t" << count() << "\nssim\t" << fmt(mean_ssim()) << "\nmask_ssim\t"
      << fmt(mean_mask_ssim()) << "\npsnr\t" << fmt(mean_psnr()) << "\n";
  return out.str();
}

std::string MetricReport::per_image_text() const {
  std::ostringstream out;
  out << "name\tssim\tmask_ssim\tpsnr\n";
  for (const auto& m : images) {
    out << m.name << '\t' << fmt(m.ssim) << '\t' << fmt(m.mask_ssim) << '\t' << fmt(m.psnr) << '\n';
  }
  return out.str();
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["count"] = count();
  j["ssim"] = mean_ssim();
  j["mask_ssim"] = mean_mask_ssim();
  j["psnr"] = mean_psnr();
  auto& arr = j["images"] = nlohmann::ordered_json::array();
  for (const auto& m : images) {
    arr.push_back({{"name", m.name}, {"ssim", m.ssim}, {"mask_ssim", m.mask_ssim}, {"psnr", m.psnr}});
  }
  return j.dump(2) + "\n";
}

void MetricReport::write(const std::filesystem::path& dir, const std::string& note) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  auto put = [&](const char* name, const std::string& body) {
    std::ofstream f(dir / name, std::ios::binary);
    f << body;
    if (!f) throw IoError("cannot write " + (dir / name).string());
  };
  put("metrics.txt", (note.empty() ? "" : "# " + note + "\n") + summary_text());
  put("per_image.tsv", per_image_text());
  put("metrics.json", to_json());
}

}  // namespace bgg
