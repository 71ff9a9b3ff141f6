#pragma once

// 18-keypoint body model (COCO/OpenPose ordering), pose heatmaps and the
// sub-pose decomposition used by the part-aware generator.

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bgg/tensor.hpp"

namespace bgg {

inline constexpr std::size_t kNumJoints = 18;

enum Joint : std::size_t {
  kNose = 0, kNeck, kRShoulder, kRElbow, kRWrist, kLShoulder, kLElbow, kLWrist,
  kRHip, kRKnee, kRAnkle, kLHip, kLKnee, kLAnkle, kREye, kLEye, kREar, kLEar
};

std::string_view joint_name(std::size_t joint);

/// Bones of the standard 18-keypoint body graph:
///
///   neck-r_shoulder  neck-l_shoulder  r_shoulder-r_elbow  r_elbow-r_wrist
///   l_shoulder-l_elbow  l_elbow-l_wrist  neck-r_hip  r_hip-r_knee
///   r_knee-r_ankle  neck-l_hip  l_hip-l_knee  l_knee-l_ankle  neck-nose
///   nose-r_eye  r_eye-r_ear  nose-l_eye  l_eye-l_ear
inline constexpr std::array<std::pair<std::size_t, std::size_t>, 17> kSkeletonEdges{{
    {kNeck, kRShoulder}, {kNeck, kLShoulder}, {kRShoulder, kRElbow}, {kRElbow, kRWrist},
    {kLShoulder, kLElbow}, {kLElbow, kLWrist}, {kNeck, kRHip}, {kRHip, kRKnee},
    {kRKnee, kRAnkle}, {kNeck, kLHip}, {kLHip, kLKnee}, {kLKnee, kLAnkle},
    {kNeck, kNose}, {kNose, kREye}, {kREye, kREar}, {kNose, kLEye}, {kLEye, kLEar},
}};

/// Joints sharing a bone with `joint`, ascending.
std::vector<std::size_t> joint_neighbors(std::size_t joint);

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

/// Pixel-unit joint coordinates (pixel centres at integer positions).
struct Skeleton {
  std::array<std::optional<Point>, kNumJoints> joints{};

  bool visible(std::size_t j) const { return joints[j].has_value(); }
  bool operator==(const Skeleton&) const = default;
};

double point_segment_distance(Point p, Point a, Point b);

/// One record per joint: "<index> <x> <y> <visible>". Coordinates use the
/// shortest decimal form that round-trips; absent joints are "-1 -1 0".
std::string format_skeleton(const Skeleton& skel);
Skeleton parse_skeleton(std::string_view text);
void write_skeleton(const std::filesystem::path& path, const Skeleton& skel);
Skeleton read_skeleton(const std::filesystem::path& path);

/// Channel j is 1 on the closed disk of `radius` pixels around joint j and 0
/// elsewhere; absent joints give an all-zero channel.
Tensor joints_to_heatmap(const Skeleton& skel, std::size_t height, std::size_t width,
                         double radius = 4.0, DType dtype = default_dtype());

/// Sub-pose i keeps channel i and the channels of its bone neighbours; all
/// other channels are zeroed. Every sub-pose keeps all 18 channels.
std::vector<Tensor> decompose_subposes(const Tensor& heatmap);

/// Foreground mask: pixels within bone_radius + margin of any bone (or of a
/// visible joint). Returns 1 x H x W with values in {0, 1}.
Tensor pose_mask(const Skeleton& skel, std::size_t height, std::size_t width,
                 double margin = 3.0, double bone_radius = 2.0, DType dtype = default_dtype());

}  // namespace bgg
