#pragma once

// Adversarial training loop state, the per-step update, and evaluation of a
// generator over corpus examples.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bgg/metrics.hpp"
#include "bgg/networks.hpp"
#include "bgg/synth_data.hpp"

namespace bgg {

/// One corpus pair as model-ready tensors (images in [-1, 1]).
struct Example {
  std::string name;
  Tensor source, source_pose, target_pose, target;
  Skeleton target_skeleton;
};

Example make_example(const CorpusEntry& entry, DType dtype = default_dtype());
std::vector<Example> make_examples(const Corpus& corpus, Split split, DType dtype = default_dtype());

struct TrainOptions {
  LossWeights weights;
  AdamConfig adam;
  std::size_t batch_size = 1;
  bool operator==(const TrainOptions&) const = default;
};

struct TrainState {
  GeneratorParams generator;
  Discriminators discriminators;
  PerceptualExtractor extractor;
  TrainOptions options;
  ParamList generator_params;
  ParamList discriminator_params;
  AdamState generator_opt;
  AdamState discriminator_opt;
  std::uint64_t step = 0;
  std::mt19937_64 rng;

  const GeneratorConfig& config() const { return generator.config; }

  static TrainState create(const GeneratorConfig& config, const TrainOptions& options,
                           std::uint64_t seed, DType dtype = default_dtype());
  /// Batch indices into a training set of `n` examples, drawn from rng.
  std::vector<std::size_t> sample_batch(std::size_t n);
};

struct StepRecord {
  std::uint64_t step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double gan = 0.0;
  double l1 = 0.0;
  double per = 0.0;

  static std::string header();  // column names, tab separated
  std::string line() const;     // shortest round-trip decimal values
};

/// One discriminator update on the detached generator output (real pairs
/// toward 1, fake toward 0), then one generator update on the weighted
/// objective through the updated discriminators. Losses are batch means
/// reduced in batch order. Throws NumericError (step index and components
/// in the message) if any loss is non-finite; the generator is then left
/// unchanged.
StepRecord train_step(TrainState& state, std::span<const Example* const> batch);

/// Runs train_step with rng-sampled batches until state.step == until_step.
/// `on_step` (optional) sees every record after the update.
void train_until(TrainState& state, std::span<const Example> train, std::uint64_t until_step,
                 const std::function<void(const StepRecord&, const TrainState&)>& on_step = {});

/// Forward pass without recording.
GeneratorOutput infer(const GeneratorParams& params, const Example& ex);

enum class Baseline { model, ground_truth, source };

/// Quantizes outputs to 8 bits, maps to [0, 1] and scores against the
/// target; Mask-SSIM uses the target skeleton's pose mask.
MetricReport evaluate(const GeneratorParams& params, std::span<const Example> examples,
                      Baseline baseline = Baseline::model);

}  // namespace bgg
