#include "bgg/skeleton.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace bgg {

std::string_view joint_name(std::size_t joint) {
  static constexpr std::array<std::string_view, kNumJoints> names{
      "nose",  "neck",   "r_shoulder", "r_elbow", "r_wrist", "l_shoulder",
      "l_elbow", "l_wrist", "r_hip",   "r_knee",  "r_ankle", "l_hip",
      "l_knee",  "l_ankle", "r_eye",   "l_eye",   "r_ear",   "l_ear"};
  return names.at(joint);
}

std::vector<std::size_t> joint_neighbors(std::size_t joint) {
  std::vector<std::size_t> out;
  for (auto [a, b] : kSkeletonEdges) {
    if (a == joint) out.push_back(b);
    if (b == joint) out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double point_segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  const double cx = a.x + t * dx - p.x, cy = a.y + t * dy - p.y;
  return std::sqrt(cx * cx + cy * cy);
}

namespace {

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw IoError("skeleton: bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string format_skeleton(const Skeleton& skel) {
  std::string out;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    out += std::to_string(j);
    if (skel.joints[j]) {
      out += ' ' + shortest(skel.joints[j]->x) + ' ' + shortest(skel.joints[j]->y) + " 1\n";
    } else {
      out += " -1 -1 0\n";
    }
  }
  return out;
}

Skeleton parse_skeleton(std::string_view text) {
  Skeleton skel;
  std::array<bool, kNumJoints> seen{};
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string idx, x, y, vis;
    if (!(fields >> idx >> x >> y >> vis)) throw IoError("skeleton: malformed record '" + line + "'");
    const double jd = parse_double(idx);
    if (jd < 0 || jd >= static_cast<double>(kNumJoints) || jd != std::floor(jd)) {
      throw IoError("skeleton: joint index out of range in '" + line + "'");
    }
    const auto j = static_cast<std::size_t>(jd);
    if (seen[j]) throw IoError("skeleton: duplicate joint " + idx);
    seen[j] = true;
    if (vis == "1") {
      skel.joints[j] = Point{parse_double(x), parse_double(y)};
    } else if (vis != "0") {
      throw IoError("skeleton: visibility must be 0 or 1 in '" + line + "'");
    }
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
    throw IoError("skeleton: expected 18 joint records");
  }
  return skel;
}

void write_skeleton(const std::filesystem::path& path, const Skeleton& skel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << format_skeleton(skel);
  if (!out) throw IoError("write failed for " + path.string());
}

Skeleton read_skeleton(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_skeleton(buf.str());
}

Tensor joints_to_heatmap(const Skeleton& skel, std::size_t height, std::size_t width,
                         double radius, DType dtype) {
  Tensor out = Tensor::zeros({kNumJoints, height, width}, dtype);
  const double r2 = radius * radius;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    if (!skel.joints[j]) continue;
    const Point p = *skel.joints[j];
    const long y0 = std::max(0L, static_cast<long>(std::floor(p.y - radius)));
    const long y1 = std::min(static_cast<long>(height) - 1, static_cast<long>(std::ceil(p.y + radius)));
    const long x0 = std::max(0L, static_cast<long>(std::floor(p.x - radius)));
    const long x1 = std::min(static_cast<long>(width) - 1, static_cast<long>(std::ceil(p.x + radius)));
    for (long y = y0; y <= y1; ++y)
      for (long x = x0; x <= x1; ++x) {
        const double dx = x - p.x, dy = y - p.y;
        if (dx * dx + dy * dy <= r2) out.set((j * height + y) * width + x, 1.0);
      }
  }
  return out;
}

std::vector<Tensor> decompose_subposes(const Tensor& heatmap) {
  if (heatmap.rank() != 3 || heatmap.dim(0) != kNumJoints) {
    throw ShapeError("decompose_subposes: expected 18 x H x W heatmap, got " +
                     shape_str(heatmap.shape()));
  }
  const std::size_t plane = heatmap.dim(1) * heatmap.dim(2);
  std::vector<Tensor> parts;
  parts.reserve(kNumJoints);
  dispatch(heatmap.dtype(), [&](auto zero) {
    using T = decltype(zero);
    auto src = heatmap.data<T>();
    for (std::size_t i = 0; i < kNumJoints; ++i) {
      Tensor part = Tensor::zeros(heatmap.shape(), heatmap.dtype());
      auto dst = part.mutable_data<T>();
      auto keep = joint_neighbors(i);
      keep.push_back(i);
      for (std::size_t c : keep)
        std::copy(src.begin() + c * plane, src.begin() + (c + 1) * plane, dst.begin() + c * plane);
      parts.push_back(std::move(part));
    }
  });
  return parts;
}

Tensor pose_mask(const Skeleton& skel, std::size_t height, std::size_t width, double margin,
                 double bone_radius, DType dtype) {
  Tensor mask = Tensor::zeros({1, height, width}, dtype);
  const double reach = bone_radius + margin;
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const Point p{static_cast<double>(x), static_cast<double>(y)};
      bool inside = false;
      for (auto [a, b] : kSkeletonEdges) {
        if (skel.joints[a] && skel.joints[b] &&
            point_segment_distance(p, *skel.joints[a], *skel.joints[b]) <= reach) {
          inside = true;
          break;
        }
      }
      for (std::size_t j = 0; !inside && j < kNumJoints; ++j) {
        if (skel.joints[j] && point_segment_distance(p, *skel.joints[j], *skel.joints[j]) <= reach) {
          inside = true;
        }
      }
      if (inside) mask.set(y * width + x, 1.0);
    }
  return mask;
}

}  // namespace bgg
