#include "bgg/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace bgg {
namespace {

void write_netpbm(const std::filesystem::path& path, const Image& image, const char* magic,
                  std::size_t channels) {
  if (image.channels != channels) throw IoError("image channel count does not match format");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << magic << '\n' << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(c);
  }
  return token;
}

Image read_netpbm(const std::filesystem::path& path, const std::string& magic,
                  std::size_t channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (next_token(in) != magic) throw IoError(path.string() + ": expected " + magic + " header");
  Image image;
  image.channels = channels;
  try {
    image.width = std::stoul(next_token(in));
    image.height = std::stoul(next_token(in));
    if (std::stoul(next_token(in)) != 255) throw IoError(path.string() + ": maxval must be 255");
  } catch (const std::logic_error&) {
    throw IoError(path.string() + ": malformed header");
  }
  if (image.width == 0 || image.height == 0) throw IoError(path.string() + ": empty image");
  image.pixels.resize(image.width * image.height * channels);
  in.read(reinterpret_cast<char*>(image.pixels.data()),
          static_cast<std::streamsize>(image.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(image.pixels.size())) {
    throw IoError(path.string() + ": truncated pixel data");
  }
  return image;
}

}  // namespace

Image Image::blank(std::size_t height, std::size_t width, std::size_t channels) {
  return {height, width, channels, std::vector<std::uint8_t>(height * width * channels, 0)};
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  write_netpbm(path, image, "P6", 3);
}
Image read_ppm(const std::filesystem::path& path) { return read_netpbm(path, "P6", 3); }
void write_pgm(const std::filesystem::path& path, const Image& image) {
  write_netpbm(path, image, "P5", 1);
}
Image read_pgm(const std::filesystem::path& path) { return read_netpbm(path, "P5", 1); }

Image tensor_to_image(const Tensor& t, double lo, double hi) {
  if (t.rank() != 3) throw ShapeError("tensor_to_image: expected C x H x W");
  const std::size_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  Image image = Image::blank(h, w, c);
  const auto values = t.to_vector();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double v = (values[(ch * h + y) * w + x] - lo) / (hi - lo);
        image.at(y, x, ch) =
            static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
  return image;
}

Tensor image_to_tensor(const Image& image, double lo, double hi, DType dtype) {
  const std::size_t c = image.channels, h = image.height, w = image.width;
  std::vector<double> values(c * h * w);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        values[(ch * h + y) * w + x] = lo + (hi - lo) * image.at(y, x, ch) / 255.0;
  return Tensor::from({c, h, w}, values, dtype);
}

Image hconcat(const std::vector<Image>& images) {
  if (images.empty()) return {};
  const std::size_t h = images.front().height;
  std::size_t total_w = 0;
  for (const auto& im : images) {
    if (im.height != h) throw ShapeError("hconcat: heights differ");
    total_w += im.width;
  }
  Image out = Image::blank(h, total_w, 3);
  std::size_t x0 = 0;
  for (const auto& im : images) {
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < im.width; ++x)
        for (std::size_t c = 0; c < 3; ++c)
          out.at(y, x0 + x, c) = im.at(y, x, im.channels == 3 ? c : 0);
    x0 += im.width;
  }
  return out;
}

}  // namespace bgg
