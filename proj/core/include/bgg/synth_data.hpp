#pragma once

// Deterministic synthetic pose-transfer corpus: articulated stick figures with
// per-identity palettes and proportions, rendered on a smooth textured
// background. Every pair shares identity (palette, proportions, background)
// and differs only in pose.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bgg/image_io.hpp"
#include "bgg/skeleton.hpp"

namespace bgg {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
  auto operator<=>(const Rgb&) const = default;
};

/// Palette slots used by the renderer.
enum PaletteSlot : int { kSkin = 0, kShirt = 1, kPants = 2, kNumPaletteSlots = 3 };

/// Lengths are in pixels at the reference 64 x 64 resolution.
struct Identity {
  std::array<Rgb, kNumPaletteSlots> palette{};
  Rgb background_a, background_b;
  double background_freq_x = 0.0, background_freq_y = 0.0, background_phase = 0.0;

  double upper_arm = 0.0, forearm = 0.0, thigh = 0.0, shin = 0.0, torso = 0.0;
  double shoulder_half = 0.0, hip_half = 0.0, neck_to_nose = 0.0;
  double limb_radius = 0.0, torso_radius = 0.0, head_radius = 0.0;

  bool operator==(const Identity&) const = default;
};

/// Sampling ranges (reference resolution) for the proportion fields.
struct ProportionRange {
  double min, max;
};
inline constexpr ProportionRange kUpperArmRange{8.0, 11.0};
inline constexpr ProportionRange kForearmRange{7.0, 10.0};
inline constexpr ProportionRange kThighRange{10.0, 12.5};
inline constexpr ProportionRange kShinRange{9.0, 11.5};
inline constexpr ProportionRange kTorsoRange{14.0, 17.0};
inline constexpr ProportionRange kShoulderHalfRange{5.0, 7.0};
inline constexpr ProportionRange kHipHalfRange{3.5, 5.0};
inline constexpr ProportionRange kLimbRadiusRange{1.6, 2.4};
inline constexpr ProportionRange kTorsoRadiusRange{3.5, 5.0};
inline constexpr ProportionRange kHeadRadiusRange{3.5, 4.5};

Identity synth_identity(std::uint64_t seed);

struct Rendering {
  Skeleton skeleton;
  Image image;
  /// Per pixel: palette slot that fully covers it, -1 for untouched
  /// background, -2 for partially covered (anti-aliased) pixels.
  std::vector<int> owner;
};

/// Samples joint angles within anatomical ranges and renders the figure.
Rendering synth_pose(const Identity& identity, std::uint64_t pose_seed, std::size_t height = 64,
                     std::size_t width = 64);

/// Renders a given skeleton with an identity (used by synth_pose).
Rendering render_figure(const Identity& identity, const Skeleton& skel, std::size_t height,
                        std::size_t width);

/// For each palette slot, the distinct colors found on pixels it fully covers.
std::array<std::vector<Rgb>, kNumPaletteSlots> extract_palette(const Rendering& rendering);

// ---- corpus ------------------------------------------------------------------

enum class Split { train, test };
std::string_view split_name(Split split);

struct SamplePair {
  std::string stem;
  Split split = Split::train;
  Identity identity;
  Image image_a, image_b;
  Skeleton skel_a, skel_b;
};

/// Pair `index` of a corpus generated with `seed`.
SamplePair make_pair(std::uint64_t seed, std::size_t index, std::size_t height, std::size_t width,
                     Split split);

struct CorpusInfo {
  std::size_t height = 64;
  std::size_t width = 64;
  std::uint64_t seed = 0;
  std::size_t pairs = 0;
  std::size_t test_pairs = 0;
  double heatmap_radius = 4.0;
};

struct CorpusEntry {
  std::string stem;
  Split split = Split::train;
  Image image_a, image_b;
  Skeleton skel_a, skel_b;
  Image heat_a, heat_b;  // 18 channels stacked vertically, 0/255
};

struct Corpus {
  CorpusInfo info;
  std::vector<CorpusEntry> entries;

  std::vector<const CorpusEntry*> split(Split which) const;
};

/// Writes `pairs` pairs; the last `test_pairs` are tagged test. Layout:
///   manifest.txt            "# key value" header lines, then "<stem>\t<split>"
///   <stem>_a.ppm/_b.ppm     images (P6)
///   <stem>_a.skel/_b.skel   joint records
///   <stem>_a.heat.pgm/_b... heatmaps (P5, 18 channels stacked vertically)
void make_dataset(const CorpusInfo& info, const std::filesystem::path& out_dir);

Corpus load_corpus(const std::filesystem::path& dir);

/// 18 x H x W heatmap tensor <-> stacked P5 image.
Image heatmap_to_image(const Tensor& heatmap);
Tensor heatmap_from_image(const Image& stacked, DType dtype = default_dtype());

/// Grayscale render of a heatmap (max over channels) for visual grids.
Image render_pose(const Tensor& heatmap);

}  // namespace bgg
