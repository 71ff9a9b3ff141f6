#include "bgg/synth_data.hpp"

#include <cstdio>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "bgg/errors.hpp"

namespace bgg {
namespace {

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
  return mix(mix(mix(seed) ^ index) ^ (stream * 0x632be59bd9b4e019ULL));
}

double uniform(std::mt19937_64& rng, ProportionRange r) {
  return std::uniform_real_distribution<double>(r.min, r.max)(rng);
}

Rgb random_rgb(std::mt19937_64& rng, int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  const int r = d(rng), g = d(rng), b = d(rng);
  return {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
}

int l1(Rgb a, Rgb b) {
  return std::abs(a.r - b.r) + std::abs(a.g - b.g) + std::abs(a.b - b.b);
}

Point rotate(Point v, double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  return {v.x * std::cos(a) - v.y * std::sin(a), v.x * std::sin(a) + v.y * std::cos(a)};
}

Point add(Point a, Point b, double s = 1.0) { return {a.x + s * b.x, a.y + s * b.y}; }

struct Capsule {
  Point a, b;
  double radius;
  int slot;
};

}  // namespace

Identity synth_identity(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Identity id;
  id.background_a = random_rgb(rng, 30, 200);
  id.background_b = random_rgb(rng, 30, 200);
  const Rgb bg_mid{static_cast<std::uint8_t>((id.background_a.r + id.background_b.r) / 2),
                   static_cast<std::uint8_t>((id.background_a.g + id.background_b.g) / 2),
                   static_cast<std::uint8_t>((id.background_a.b + id.background_b.b) / 2)};
  for (int slot = 0; slot < kNumPaletteSlots; ++slot) {
    Rgb c = random_rgb(rng, 0, 255);
    for (int attempt = 0; attempt < 64; ++attempt) {
      bool ok = l1(c, bg_mid) >= 90;
      for (int prev = 0; prev < slot; ++prev) ok = ok && l1(c, id.palette[prev]) >= 60;
      if (ok) break;
      c = random_rgb(rng, 0, 255);
    }
    id.palette[slot] = c;
  }
  std::uniform_real_distribution<double> freq(0.06, 0.22);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  id.background_freq_x = freq(rng) * (rng() % 2 ? 1.0 : -1.0);
  id.background_freq_y = freq(rng);
  id.background_phase = phase(rng);

  id.upper_arm = uniform(rng, kUpperArmRange);
  id.forearm = uniform(rng, kForearmRange);
  id.thigh = uniform(rng, kThighRange);
  id.shin = uniform(rng, kShinRange);
  id.torso = uniform(rng, kTorsoRange);
  id.shoulder_half = uniform(rng, kShoulderHalfRange);
  id.hip_half = uniform(rng, kHipHalfRange);
  id.limb_radius = uniform(rng, kLimbRadiusRange);
  id.torso_radius = uniform(rng, kTorsoRadiusRange);
  id.head_radius = uniform(rng, kHeadRadiusRange);
  id.neck_to_nose = id.head_radius + 1.5;
  return id;
}

Rendering synth_pose(const Identity& id, std::uint64_t pose_seed, std::size_t height,
                     std::size_t width) {
  std::mt19937_64 rng(pose_seed);
  auto angle = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const double s = static_cast<double>(std::min(height, width)) / 64.0;
  const double lean = angle(-10, 10);
  const Point hip_mid{width / 2.0 + angle(-2, 2) * s, height / 2.0 + 6.0 * s + angle(-2, 2) * s};
  const Point up = rotate({0, -1}, lean);
  const Point down = rotate({0, 1}, lean);
  const Point perp = rotate({1, 0}, lean);

  Skeleton skel;
  auto set = [&](std::size_t j, Point p) { skel.joints[j] = p; };
  const Point neck = add(hip_mid, up, id.torso * s);
  set(kNeck, neck);
  set(kRShoulder, add(neck, perp, -id.shoulder_half * s));
  set(kLShoulder, add(neck, perp, id.shoulder_half * s));
  set(kRHip, add(hip_mid, perp, -id.hip_half * s));
  set(kLHip, add(hip_mid, perp, id.hip_half * s));

  // Arms: upper arm swings outward from straight down, forearm bends.
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? 1.0 : -1.0;  // right side of the body is image-left
    const double swing = angle(15, 165);
    const double bend = angle(-30, 120);
    const Point upper = rotate(down, sign * swing);
    const Point fore = rotate(upper, sign * bend);
    const std::size_t sh = side == 0 ? kRShoulder : kLShoulder;
    const Point elbow = add(*skel.joints[sh], upper, id.upper_arm * s);
    set(side == 0 ? kRElbow : kLElbow, elbow);
    set(side == 0 ? kRWrist : kLWrist, add(elbow, fore, id.forearm * s));
  }
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? 1.0 : -1.0;
    const double swing = angle(-10, 40);
    const double bend = angle(-50, 10);
    const Point thigh = rotate(down, sign * swing);
    const Point shin = rotate(thigh, sign * bend);
    const std::size_t hip = side == 0 ? kRHip : kLHip;
    const Point knee = add(*skel.joints[hip], thigh, id.thigh * s);
    set(side == 0 ? kRKnee : kLKnee, knee);
    set(side == 0 ? kRAnkle : kLAnkle, add(knee, shin, id.shin * s));
  }

  const double tilt = angle(-15, 15);
  const double yaw = angle(-0.6, 0.6);
  const Point head_up = rotate(up, tilt);
  const Point head_side = rotate(perp, tilt);
  const Point nose = add(neck, head_up, id.neck_to_nose * s);
  set(kNose, nose);
  auto face = [&](double side_off, double up_off) {
    return add(add(nose, head_side, side_off * s), head_up, up_off * s);
  };
  set(kREye, face(-1.8 + 1.2 * yaw, 1.5));
  set(kLEye, face(1.8 + 1.2 * yaw, 1.5));
  set(kREar, face(-3.4 + 1.5 * yaw, 0.8));
  set(kLEar, face(3.4 + 1.5 * yaw, 0.8));
  if (yaw > 0.35) skel.joints[kREar].reset();
  if (yaw < -0.35) skel.joints[kLEar].reset();

  for (auto& j : skel.joints) {
    if (j && (j->x < 0.0 || j->y < 0.0 || j->x > width - 1.0 || j->y > height - 1.0)) j.reset();
  }
  return render_figure(id, skel, height, width);
}

Rendering render_figure(const Identity& id, const Skeleton& skel, std::size_t height,
                        std::size_t width) {
  const double s = static_cast<double>(std::min(height, width)) / 64.0;
  std::vector<double> rgb(height * width * 3);
  std::vector<int> owner(height * width, -1);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const double t = 0.5 + 0.5 * std::sin(id.background_freq_x * x / s +
                                            id.background_freq_y * y / s + id.background_phase);
      const Rgb a = id.background_a, b = id.background_b;
      double* px = &rgb[(y * width + x) * 3];
      px[0] = a.r + t * (b.r - a.r);
      px[1] = a.g + t * (b.g - a.g);
      px[2] = a.b + t * (b.b - a.b);
    }

  std::vector<Capsule> capsules;
  auto bone = [&](std::size_t a, std::size_t b, double radius, int slot) {
    if (skel.joints[a] && skel.joints[b]) capsules.push_back({*skel.joints[a], *skel.joints[b], radius * s, slot});
  };
  const double limb = id.limb_radius;
  bone(kRHip, kRKnee, limb * 1.15, kPants);
  bone(kRKnee, kRAnkle, limb * 1.15, kPants);
  bone(kLHip, kLKnee, limb * 1.15, kPants);
  bone(kLKnee, kLAnkle, limb * 1.15, kPants);
  bone(kRHip, kLHip, limb * 1.15, kPants);
  bone(kNeck, kRHip, limb, kShirt);
  bone(kNeck, kLHip, limb, kShirt);
  if (skel.joints[kNeck] && skel.joints[kRHip] && skel.joints[kLHip]) {
    const Point mid{(skel.joints[kRHip]->x + skel.joints[kLHip]->x) / 2,
                    (skel.joints[kRHip]->y + skel.joints[kLHip]->y) / 2};
    capsules.push_back({*skel.joints[kNeck], mid, id.torso_radius * s, kShirt});
  }
  bone(kNeck, kRShoulder, limb, kShirt);
  bone(kNeck, kLShoulder, limb, kShirt);
  bone(kRShoulder, kRElbow, limb, kShirt);
  bone(kLShoulder, kLElbow, limb, kShirt);
  bone(kRElbow, kRWrist, limb * 0.9, kSkin);
  bone(kLElbow, kLWrist, limb * 0.9, kSkin);
  bone(kNeck, kNose, limb * 0.9, kSkin);
  if (skel.joints[kNose]) capsules.push_back({*skel.joints[kNose], *skel.joints[kNose], id.head_radius * s, kSkin});
  bone(kNose, kREye, 1.3, kSkin);
  bone(kREye, kREar, 1.3, kSkin);
  bone(kNose, kLEye, 1.3, kSkin);
  bone(kLEye, kLEar, 1.3, kSkin);

  for (const auto& c : capsules) {
    const Rgb col = id.palette[c.slot];
    const double reach = c.radius + 0.5;
    const long y0 = std::max(0L, static_cast<long>(std::floor(std::min(c.a.y, c.b.y) - reach)));
    const long y1 = std::min(static_cast<long>(height) - 1, static_cast<long>(std::ceil(std::max(c.a.y, c.b.y) + reach)));
    const long x0 = std::max(0L, static_cast<long>(std::floor(std::min(c.a.x, c.b.x) - reach)));
    const long x1 = std::min(static_cast<long>(width) - 1, static_cast<long>(std::ceil(std::max(c.a.x, c.b.x) + reach)));
    for (long y = y0; y <= y1; ++y)
      for (long x = x0; x <= x1; ++x) {
        const double d = point_segment_distance({static_cast<double>(x), static_cast<double>(y)}, c.a, c.b);
        const double cov = std::clamp(c.radius + 0.5 - d, 0.0, 1.0);
        if (cov <= 0.0) continue;
        double* px = &rgb[(y * width + x) * 3];
        px[0] = px[0] * (1.0 - cov) + col.r * cov;
        px[1] = px[1] * (1.0 - cov) + col.g * cov;
        px[2] = px[2] * (1.0 - cov) + col.b * cov;
        int& o = owner[y * width + x];
        if (cov >= 1.0) {
          o = c.slot;
        } else if (o != c.slot) {
          o = -2;
        }
      }
  }

  Rendering out;
  out.skeleton = skel;
  out.owner = std::move(owner);
  out.image = Image::blank(height, width, 3);
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    out.image.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(rgb[i], 0.0, 255.0)));
  }
  return out;
}

std::array<std::vector<Rgb>, kNumPaletteSlots> extract_palette(const Rendering& r) {
  std::array<std::set<Rgb>, kNumPaletteSlots> found;
  for (std::size_t i = 0; i < r.owner.size(); ++i) {
    const int slot = r.owner[i];
    if (slot < 0) continue;
    const auto* px = &r.image.pixels[i * 3];
    found[slot].insert(Rgb{px[0], px[1], px[2]});
  }
  std::array<std::vector<Rgb>, kNumPaletteSlots> out;
  for (int s = 0; s < kNumPaletteSlots; ++s) out[s].assign(found[s].begin(), found[s].end());
  return out;
}

// ---- corpus ------------------------------------------------------------------

std::string_view split_name(Split split) { return split == Split::train ? "train" : "test"; }

SamplePair make_pair(std::uint64_t seed, std::size_t index, std::size_t height, std::size_t width,
                     Split split) {
  SamplePair pair;
  char stem[32];
  std::snprintf(stem, sizeof(stem), "pair_%06zu", index);
  pair.stem = stem;
  pair.split = split;
  pair.identity = synth_identity(derive_seed(seed, index, 0));
  auto a = synth_pose(pair.identity, derive_seed(seed, index, 1), height, width);
  auto b = synth_pose(pair.identity, derive_seed(seed, index, 2), height, width);
  pair.image_a = std::move(a.image);
  pair.image_b = std::move(b.image);
  pair.skel_a = a.skeleton;
  pair.skel_b = b.skeleton;
  return pair;
}

std::vector<const CorpusEntry*> Corpus::split(Split which) const {
  std::vector<const CorpusEntry*> out;
  for (const auto& e : entries)
    if (e.split == which) out.push_back(&e);
  return out;
}

Image heatmap_to_image(const Tensor& heatmap) {
  if (heatmap.rank() != 3 || heatmap.dim(0) != kNumJoints) throw ShapeError("heatmap_to_image: expected 18 x H x W");
  const std::size_t h = heatmap.dim(1), w = heatmap.dim(2);
  Image img = Image::blank(kNumJoints * h, w, 1);
  const auto v = heatmap.to_vector();
  for (std::size_t i = 0; i < v.size(); ++i) img.pixels[i] = v[i] >= 0.5 ? 255 : 0;
  return img;
}

Tensor heatmap_from_image(const Image& stacked, DType dtype) {
  if (stacked.channels != 1 || stacked.height % kNumJoints != 0) {
    throw IoError("heatmap image must be single-channel with height divisible by 18");
  }
  std::vector<double> v(stacked.pixels.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = stacked.pixels[i] >= 128 ? 1.0 : 0.0;
  return Tensor::from({kNumJoints, stacked.height / kNumJoints, stacked.width}, v, dtype);
}

Image render_pose(const Tensor& heatmap) {
  const std::size_t h = heatmap.dim(1), w = heatmap.dim(2);
  Image img = Image::blank(h, w, 1);
  const auto v = heatmap.to_vector();
  for (std::size_t j = 0; j < heatmap.dim(0); ++j)
    for (std::size_t i = 0; i < h * w; ++i) {
      const auto level = static_cast<std::uint8_t>(std::lround(std::clamp(v[j * h * w + i], 0.0, 1.0) * 255.0));
      img.pixels[i] = std::max(img.pixels[i], level);
    }
  return img;
}

void make_dataset(const CorpusInfo& info, const std::filesystem::path& dir) {
  if (info.pairs == 0 || info.test_pairs > info.pairs) {
    throw ConfigError("make_dataset: need pairs >= 1 and test_pairs <= pairs");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create corpus directory " + dir.string());
  }
  std::ostringstream manifest;
  manifest << "# bgg-corpus 1\n"
           << "# height " << info.height << "\n# width " << info.width << "\n# seed " << info.seed
           << "\n# pairs " << info.pairs << "\n# test_pairs " << info.test_pairs
           << "\n# heatmap_radius " << info.heatmap_radius << "\n";
  const std::size_t first_test = info.pairs - info.test_pairs;
  for (std::size_t i = 0; i < info.pairs; ++i) {
    const Split split = i >= first_test ? Split::test : Split::train;
    const SamplePair pair = make_pair(info.seed, i, info.height, info.width, split);
    const auto base = dir / pair.stem;
    write_ppm(base.string() + "_a.ppm", pair.image_a);
    write_ppm(base.string() + "_b.ppm", pair.image_b);
    write_skeleton(base.string() + "_a.skel", pair.skel_a);
    write_skeleton(base.string() + "_b.skel", pair.skel_b);
    write_pgm(base.string() + "_a.heat.pgm",
              heatmap_to_image(joints_to_heatmap(pair.skel_a, info.height, info.width, info.heatmap_radius, DType::f32)));
    write_pgm(base.string() + "_b.heat.pgm",
              heatmap_to_image(joints_to_heatmap(pair.skel_b, info.height, info.width, info.heatmap_radius, DType::f32)));
    manifest << pair.stem << '\t' << split_name(split) << '\n';
  }
  std::ofstream out(dir / "manifest.txt", std::ios::binary);
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.str();
  if (!out) throw IoError("manifest write failed in " + dir.string());
}

Corpus load_corpus(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw IoError("no manifest.txt in " + dir.string());
  Corpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream fields(line.substr(1));
      std::string key, value;
      fields >> key >> value;
      try {
        if (key == "height") corpus.info.height = std::stoul(value);
        else if (key == "width") corpus.info.width = std::stoul(value);
        else if (key == "seed") corpus.info.seed = std::stoull(value);
        else if (key == "pairs") corpus.info.pairs = std::stoul(value);
        else if (key == "test_pairs") corpus.info.test_pairs = std::stoul(value);
        else if (key == "heatmap_radius") corpus.info.heatmap_radius = std::stod(value);
      } catch (const std::logic_error&) {
        throw IoError("manifest: bad header value in '" + line + "'");
      }
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw IoError("manifest: malformed entry '" + line + "'");
    CorpusEntry e;
    e.stem = line.substr(0, tab);
    const std::string tag = line.substr(tab + 1);
    if (tag != "train" && tag != "test") throw IoError("manifest: unknown split '" + tag + "'");
    e.split = tag == "train" ? Split::train : Split::test;
    const std::string base = (dir / e.stem).string();
    e.image_a = read_ppm(base + "_a.ppm");
    e.image_b = read_ppm(base + "_b.ppm");
    e.skel_a = read_skeleton(base + "_a.skel");
    e.skel_b = read_skeleton(base + "_b.skel");
    e.heat_a = read_pgm(base + "_a.heat.pgm");
    e.heat_b = read_pgm(base + "_b.heat.pgm");
    if (e.image_a.height != corpus.info.height || e.image_a.width != corpus.info.width) {
      throw IoError("corpus image " + e.stem + " does not match manifest size");
    }
    corpus.entries.push_back(std::move(e));
  }
  if (corpus.entries.size() != corpus.info.pairs) throw IoError("manifest pair count mismatch");
  return corpus;
}

}  // namespace bgg
