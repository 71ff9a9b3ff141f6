#pragma once

// Full model: encoders, the T-stage graph generator with image/attention
// decoders, the appearance and shape discriminators, and the joint objective.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bgg/graph_blocks.hpp"
#include "bgg/nn.hpp"

namespace bgg {

inline constexpr std::size_t kHeatmapChannels = 18;
inline constexpr std::size_t kImageChannels = 3;

/// Ablation ladder:
///   B1  IA blocks only, no graph reasoning
///   B2  BGR with the B2A branch only      B3  A2B branch only
///   B4  both branches, shared weights     B5  both branches, separate weights
///   B6  B5 + attention-based image fusion
///   plus_plus  part-aware BGR + part-aware IA + fusion
enum class Variant { B1, B2, B3, B4, B5, B6, plus_plus };

std::string_view variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);

struct GeneratorConfig {
  std::size_t blocks = 9;
  std::size_t channels = 128;
  std::size_t nodes = 32;
  std::size_t node_channels = 0;  // 0 selects channels / 2
  std::size_t height = 64;
  std::size_t width = 64;
  Variant variant = Variant::B6;
  std::size_t ia_kernel = 3;
  std::size_t part_kernel = 1;
  bool share_parts = true;    // one PBGR / part-update parameter set for all parts
  bool use_norm = true;
  std::size_t disc_channels = 32;
  std::size_t disc_layers = 4;

  std::size_t resolved_node_channels() const { return node_channels ? node_channels : channels / 2; }
  /// Each part code has C/2 channels so that concat(B2A_i, A2B_i) matches the
  /// appearance code width.
  std::size_t part_channels() const { return channels / 2; }
  bool has_attention() const { return variant == Variant::B6 || variant == Variant::plus_plus; }
  bool part_aware() const { return variant == Variant::plus_plus; }
  /// Throws ConfigError on out-of-range fields.
  void validate() const;
  bool operator==(const GeneratorConfig&) const = default;
};

/// k4 s2 p1 convolutions with instance norm and relu; spatial extent / 4.
struct EncoderParams {
  std::vector<ConvUnit> layers;

  static EncoderParams make(ParamInit& init, const std::string& name, std::size_t c_in,
                            std::size_t c_out, bool use_norm);
  Tensor forward(Tape* tape, const Tensor& x) const;
  void collect(ParamList& out) const;
};

/// Two k4 s2 p1 transposed convolutions (norm + relu) and a 3x3 output conv.
struct DecoderParams {
  std::vector<ConvTransposeLayer> up;
  std::vector<InstanceNorm> norms;
  ConvLayer out;
  Activation final_act = Activation::tanh;

  static DecoderParams make(ParamInit& init, const std::string& name, std::size_t c_in,
                            std::size_t c_out, bool use_norm, Activation final_act);
  Tensor forward(Tape* tape, const Tensor& x) const;
  void collect(ParamList& out) const;
};

struct GeneratorParams {
  GeneratorConfig config;
  EncoderParams appearance_encoder;
  EncoderParams shape_encoder;  // shared by the source and target poses
  std::vector<BGRBlockParams> bgr;  // empty for B1
  std::vector<IABlockParams> ia;
  std::vector<PBGRParams> pbgr;
  std::vector<PartIAParams> part_ia;
  DecoderParams image_decoder;
  std::optional<DecoderParams> attention_decoder;

  static GeneratorParams make(const GeneratorConfig& config, std::uint64_t seed,
                              DType dtype = default_dtype());
  ParamList parameters() const;
};

struct GeneratorOutput {
  Tensor image;         // fused output (== intermediate without fusion)
  Tensor intermediate;  // decoded image, tanh range
  std::optional<Tensor> attention;  // 1 x H x W, sigmoid range
};

/// source: 3 x H x W in [-1, 1]; poses: 18 x H x W heatmaps.
GeneratorOutput generator_forward(Tape* tape, const Tensor& source, const Tensor& source_pose,
                                  const Tensor& target_pose, const GeneratorParams& params);

/// Strided k4 s2 p1 convolution stack with leaky relu (0.2) between layers,
/// ending in a one-channel logit map.
struct DiscriminatorParams {
  std::vector<ConvLayer> layers;

  static DiscriminatorParams make(ParamInit& init, const std::string& name, std::size_t c_in,
                                  std::size_t base_channels, std::size_t num_layers);
  std::size_t in_channels() const { return layers.front().in_channels(); }
  void collect(ParamList& out) const;
};

Tensor discriminator_logits(Tape* tape, const Tensor& x, const DiscriminatorParams& p);
/// sigmoid(discriminator_logits).
Tensor discriminator_forward(Tape* tape, const Tensor& x, const DiscriminatorParams& p);

/// Appearance discriminator sees concat(source, image) (6 channels); shape
/// discriminator sees concat(target_pose, image) (21 channels).
struct Discriminators {
  DiscriminatorParams appearance;
  DiscriminatorParams shape;

  static Discriminators make(const GeneratorConfig& config, std::uint64_t seed,
                             DType dtype = default_dtype());
  ParamList parameters() const;
};

/// Fixed random feature extractor standing in for a pretrained backbone:
/// two 3x3 convolutions (3 -> 64 -> 64, He-scaled seeded weights) with relu.
/// Weights are constants and never trained.
struct PerceptualExtractor {
  static constexpr std::uint64_t kDefaultSeed = 0x70657263ULL;
  Tensor kernel1, kernel2;

  static PerceptualExtractor make(std::uint64_t seed = kDefaultSeed, std::size_t features = 64,
                                  DType dtype = default_dtype());
  std::size_t features() const { return kernel2.dim(0); }
};

Tensor perceptual_features(const Tensor& image, const PerceptualExtractor& extractor);

struct LossWeights {
  double gan = 5.0;
  double l1 = 10.0;
  double per = 10.0;
  bool operator==(const LossWeights&) const = default;
};

struct GeneratorLoss {
  Tensor total;
  Tensor gan;  // sum over both discriminators of mean BCE toward "real"
  Tensor l1;   // mean |output - target|
  Tensor per;  // mean squared feature distance
};

/// Throws NumericError naming the first non-finite component.
GeneratorLoss total_loss(const Tensor& output, const Tensor& target,
                         const Tensor& appearance_fake_logits, const Tensor& shape_fake_logits,
                         const LossWeights& weights, const PerceptualExtractor& extractor);

}  // namespace bgg
