#pragma once

// Binary checkpoint container (all integers little-endian):
//
//   "BGG1"                      magic
//   u32 version                 kCheckpointVersion
//   u64 n, n bytes              model/optimizer config as JSON
//   u64 step, u64 g_adam_step, u64 d_adam_step
//   u64 n, n bytes              RNG state (textual mt19937_64 state)
//   u64 count, then per tensor:
//     u32 n, n bytes name; u8 dtype (0 f32, 1 f64); u32 rank; u64 extents[rank];
//     payload (row-major, little-endian IEEE 754)
//
// Tensor names: generator/discriminator parameter names, "adam.g.m/<name>",
// "adam.g.v/<name>", "adam.d.m/<name>", "adam.d.v/<name>",
// "perceptual.kernel1", "perceptual.kernel2".

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bgg/training.hpp"

namespace bgg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct TensorFile {
  std::string config_json = "{}";
  std::uint64_t step = 0, g_adam_step = 0, d_adam_step = 0;
  std::string rng_state;
  std::vector<NamedTensor> tensors;

  const Tensor* find(const std::string& name) const;
};

void write_tensor_file(std::ostream& out, const TensorFile& file);
TensorFile read_tensor_file(std::istream& in);
void save_tensor_file(const std::filesystem::path& path, const TensorFile& file);
TensorFile load_tensor_file(const std::filesystem::path& path);

TensorFile to_tensor_file(const TrainState& state);
/// Rebuilds a state; throws MismatchError when names, shapes or dtypes do not
/// line up with the stored configuration.
TrainState from_tensor_file(const TensorFile& file);

void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

/// Replaces the extractor kernels with "kernel1" / "kernel2" from a tensor file.
PerceptualExtractor load_perceptual_weights(const std::filesystem::path& path, DType dtype);

}  // namespace bgg
