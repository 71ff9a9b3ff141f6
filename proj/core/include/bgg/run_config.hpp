#pragma once

// JSON run configuration shared by the train / eval / ablate commands.
// Unknown keys are rejected; every field is range-checked before any work.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "bgg/networks.hpp"
#include "bgg/training.hpp"

namespace bgg {

struct RunConfig {
  std::string dataset;
  std::string out_dir = "run";
  GeneratorConfig model;
  TrainOptions train;
  std::uint64_t steps = 1000;
  std::uint64_t seed = 1;
  std::uint64_t checkpoint_every = 0;  // 0: only the final checkpoint
  std::uint64_t sample_every = 0;      // 0: no intermediate image grids
  std::uint64_t eval_every = 0;
  std::string perceptual_weights;      // optional tensor table with "kernel1", "kernel2"

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

/// Model + optimizer subset stored in checkpoints.
std::string model_config_to_json(const GeneratorConfig& model, const TrainOptions& train);
void model_config_from_json(std::string_view json_text, GeneratorConfig& model, TrainOptions& train);

}  // namespace bgg
