#include "bgg/networks.hpp"

#include <array>
#include <cmath>

#include "bgg/errors.hpp"
#include "bgg/skeleton.hpp"

namespace bgg {

namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 7> kVariantNames{{
    {Variant::B1, "B1"}, {Variant::B2, "B2"}, {Variant::B3, "B3"}, {Variant::B4, "B4"},
    {Variant::B5, "B5"}, {Variant::B6, "B6"}, {Variant::plus_plus, "plus-plus"},
}};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("generator config: " + what);
}

}  // namespace

std::string_view variant_name(Variant v) {
  for (const auto& [value, name] : kVariantNames)
    if (value == v) return name;
  return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (const auto& [value, n] : kVariantNames)
    if (n == name) return value;
  if (name == "plus_plus" || name == "pp" || name == "++") return Variant::plus_plus;
  return std::nullopt;
}

void GeneratorConfig::validate() const {
  require(blocks >= 1 && blocks <= 64, "blocks must be in [1, 64]");
  require(channels >= 4 && channels % 4 == 0 && channels <= 1024,
          "channels must be a multiple of 4 in [4, 1024]");
  require(nodes >= 1 && nodes <= 1024, "nodes must be in [1, 1024]");
  require(resolved_node_channels() >= 1 && resolved_node_channels() <= 1024,
          "node_channels must be in [1, 1024]");
  require(height >= 8 && width >= 8 && height % 4 == 0 && width % 4 == 0,
          "image extents must be multiples of 4 and at least 8");
  require(ia_kernel % 2 == 1 && part_kernel % 2 == 1, "block kernels must be odd");
  require(disc_channels >= 1, "disc_channels must be positive");
  require(disc_layers >= 1 && (height >> disc_layers) >= 1 && (width >> disc_layers) >= 1,
          "disc_layers too deep for the image size");
}

// ---- encoder / decoder -------------------------------------------------------

EncoderParams EncoderParams::make(ParamInit& init, const std::string& name, std::size_t c_in,
                                  std::size_t c_out, bool use_norm) {
  EncoderParams p;
  p.layers.push_back(ConvUnit::make(init, name + ".down0", c_in, c_out / 2, 4, 2, 1, use_norm,
                                    Activation::relu));
  p.layers.push_back(ConvUnit::make(init, name + ".down1", c_out / 2, c_out, 4, 2, 1, use_norm,
                                    Activation::relu));
  return p;
}

Tensor EncoderParams::forward(Tape* tape, const Tensor& x) const {
  Tensor h = x;
  for (const auto& layer : layers) h = layer.forward(tape, h);
  return h;
}

void EncoderParams::collect(ParamList& out) const {
  for (const auto& layer : layers) layer.collect(out);
}

DecoderParams DecoderParams::make(ParamInit& init, const std::string& name, std::size_t c_in,
                                  std::size_t c_out, bool use_norm, Activation final_act) {
  DecoderParams p;
  p.final_act = final_act;
  std::size_t c = c_in;
  for (int i = 0; i < 2; ++i) {
    const std::string prefix = name + ".up" + std::to_string(i);
    p.up.push_back(ConvTransposeLayer::make(init, prefix, c, c / 2, 4, 2, 1));
    if (use_norm) p.norms.push_back(InstanceNorm::make(init, prefix + ".norm", c / 2));
    c /= 2;
  }
  p.out = ConvLayer::make(init, name + ".out", c, c_out, 3, 1, 1);
  return p;
}

Tensor DecoderParams::forward(Tape* tape, const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < up.size(); ++i) {
    h = up[i].forward(tape, h);
    if (!norms.empty()) h = norms[i].forward(tape, h);
    h = relu(h);
  }
  return activate(out.forward(tape, h), final_act);
}

void DecoderParams::collect(ParamList& out_list) const {
  for (std::size_t i = 0; i < up.size(); ++i) {
    up[i].collect(out_list);
    if (!norms.empty()) norms[i].collect(out_list);
  }
  out.collect(out_list);
}

// ---- generator ---------------------------------------------------------------

GeneratorParams GeneratorParams::make(const GeneratorConfig& config, std::uint64_t seed,
                                      DType dtype) {
  config.validate();
  ParamInit init(seed, dtype);
  GeneratorParams p;
  p.config = config;
  const std::size_t c = config.channels;
  p.appearance_encoder = EncoderParams::make(init, "gen.appearance_encoder", kImageChannels, c,
                                             config.use_norm);
  const std::size_t shape_width = config.part_aware() ? config.part_channels() : c;
  p.shape_encoder = EncoderParams::make(init, "gen.shape_encoder", kHeatmapChannels, shape_width,
                                        config.use_norm);

  const std::size_t cn = config.resolved_node_channels();
  for (std::size_t t = 0; t < config.blocks; ++t) {
    const std::string stage = "gen.stage" + std::to_string(t);
    if (config.part_aware()) {
      p.pbgr.push_back(PBGRParams::make(init, stage + ".pbgr", config.part_channels(), config.nodes,
                                        std::max<std::size_t>(1, cn / 2), false, config.share_parts));
      p.part_ia.push_back(PartIAParams::make(init, stage + ".part_ia", c, config.part_channels(),
                                             config.part_kernel, config.use_norm,
                                             config.share_parts));
      continue;
    }
    switch (config.variant) {
      case Variant::B1: break;
      case Variant::B2:
        p.bgr.push_back(BGRBlockParams::make(init, stage + ".bgr", c, config.nodes, cn, false,
                                             BGRBlockParams::Branches::b2a_only));
        break;
      case Variant::B3:
        p.bgr.push_back(BGRBlockParams::make(init, stage + ".bgr", c, config.nodes, cn, false,
                                             BGRBlockParams::Branches::a2b_only));
        break;
      case Variant::B4:
        p.bgr.push_back(BGRBlockParams::make(init, stage + ".bgr", c, config.nodes, cn, true));
        break;
      default:
        p.bgr.push_back(BGRBlockParams::make(init, stage + ".bgr", c, config.nodes, cn, false));
        break;
    }
    p.ia.push_back(IABlockParams::make(init, stage + ".ia", c, config.ia_kernel, config.use_norm));
  }
  p.image_decoder = DecoderParams::make(init, "gen.image_decoder", c, kImageChannels,
                                        config.use_norm, Activation::tanh);
  if (config.has_attention()) {
    p.attention_decoder = DecoderParams::make(init, "gen.attention_decoder", c, 1, config.use_norm,
                                              Activation::sigmoid);
  }
  return p;
}

ParamList GeneratorParams::parameters() const {
  ParamList out;
  appearance_encoder.collect(out);
  shape_encoder.collect(out);
  for (const auto& b : bgr) b.collect(out);
  for (const auto& b : ia) b.collect(out);
  for (const auto& b : pbgr) b.collect(out);
  for (const auto& b : part_ia) b.collect(out);
  image_decoder.collect(out);
  if (attention_decoder) attention_decoder->collect(out);
  return out;
}

GeneratorOutput generator_forward(Tape* tape, const Tensor& source, const Tensor& source_pose,
                                  const Tensor& target_pose, const GeneratorParams& params) {
  const GeneratorConfig& cfg = params.config;
  const Shape image_shape{kImageChannels, cfg.height, cfg.width};
  const Shape pose_shape{kHeatmapChannels, cfg.height, cfg.width};
  if (source.shape() != image_shape) {
    throw ShapeError("generator: source image " + shape_str(source.shape()) + ", expected " +
                     shape_str(image_shape));
  }
  if (source_pose.shape() != pose_shape || target_pose.shape() != pose_shape) {
    throw ShapeError("generator: pose heatmaps must be " + shape_str(pose_shape));
  }

  Tensor appearance = params.appearance_encoder.forward(tape, source);
  if (cfg.part_aware()) {
    const auto sub_a = decompose_subposes(source_pose);
    const auto sub_b = decompose_subposes(target_pose);
    PartCodes codes;
    for (std::size_t i = 0; i < sub_a.size(); ++i) {
      codes.source.push_back(params.shape_encoder.forward(tape, sub_a[i]));
      codes.target.push_back(params.shape_encoder.forward(tape, sub_b[i]));
    }
    for (std::size_t t = 0; t < cfg.blocks; ++t) {
      PartCodes reasoned;
      const Tensor global = pbgr_block(tape, codes, params.pbgr[t], kNumParts, &reasoned);
      auto out = part_ia_block(tape, appearance, global, reasoned, params.part_ia[t]);
      appearance = std::move(out.appearance);
      codes = std::move(out.codes);
    }
  } else {
    Tensor code_a = params.shape_encoder.forward(tape, source_pose);
    Tensor code_b = params.shape_encoder.forward(tape, target_pose);
    for (std::size_t t = 0; t < cfg.blocks; ++t) {
      if (!params.bgr.empty()) std::tie(code_a, code_b) = bgr_block(tape, code_a, code_b, params.bgr[t]);
      auto out = ia_block(tape, appearance, code_a, code_b, params.ia[t]);
      appearance = std::move(out.appearance);
      code_a = std::move(out.source_code);
      code_b = std::move(out.target_code);
    }
  }

  GeneratorOutput result;
  result.intermediate = params.image_decoder.forward(tape, appearance);
  if (params.attention_decoder) {
    result.attention = params.attention_decoder->forward(tape, appearance);
    result.image = aif_fuse(source, result.intermediate, *result.attention);
  } else {
    result.image = result.intermediate;
  }
  return result;
}

// ---- discriminators ----------------------------------------------------------

DiscriminatorParams DiscriminatorParams::make(ParamInit& init, const std::string& name,
                                              std::size_t c_in, std::size_t base_channels,
                                              std::size_t num_layers) {
  DiscriminatorParams p;
  std::size_t c = c_in;
  for (std::size_t i = 0; i < num_layers; ++i) {
    const std::size_t next = i + 1 == num_layers ? 1 : base_channels << i;
    p.layers.push_back(ConvLayer::make(init, name + ".conv" + std::to_string(i), c, next, 4, 2, 1));
    c = next;
  }
  return p;
}

void DiscriminatorParams::collect(ParamList& out) const {
  for (const auto& l : layers) l.collect(out);
}

Tensor discriminator_logits(Tape* tape, const Tensor& x, const DiscriminatorParams& p) {
  if (x.rank() != 3 || x.dim(0) != p.in_channels()) {
    throw ShapeError("discriminator: expected " + std::to_string(p.in_channels()) +
                     " input channels, got " + shape_str(x.shape()));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    h = p.layers[i].forward(tape, h);
    if (i + 1 < p.layers.size()) h = leaky_relu(h, 0.2);
  }
  return h;
}

Tensor discriminator_forward(Tape* tape, const Tensor& x, const DiscriminatorParams& p) {
  return sigmoid(discriminator_logits(tape, x, p));
}

Discriminators Discriminators::make(const GeneratorConfig& config, std::uint64_t seed, DType dtype) {
  config.validate();
  ParamInit init(seed, dtype);
  Discriminators d;
  d.appearance = DiscriminatorParams::make(init, "disc.appearance", 2 * kImageChannels,
                                           config.disc_channels, config.disc_layers);
  d.shape = DiscriminatorParams::make(init, "disc.shape", kHeatmapChannels + kImageChannels,
                                      config.disc_channels, config.disc_layers);
  return d;
}

ParamList Discriminators::parameters() const {
  ParamList out;
  appearance.collect(out);
  shape.collect(out);
  return out;
}

// ---- objective ---------------------------------------------------------------

PerceptualExtractor PerceptualExtractor::make(std::uint64_t seed, std::size_t features, DType dtype) {
  PerceptualExtractor e;
  e.kernel1 = Tensor::normal({features, kImageChannels, 3, 3}, 0.0,
                             std::sqrt(2.0 / (kImageChannels * 9.0)), seed, dtype);
  e.kernel2 = Tensor::normal({features, features, 3, 3}, 0.0, std::sqrt(2.0 / (features * 9.0)),
                             seed + 1, dtype);
  return e;
}

Tensor perceptual_features(const Tensor& image, const PerceptualExtractor& e) {
  if (image.rank() != 3 || image.dim(0) != e.kernel1.dim(1)) {
    throw ShapeError("perceptual_features: expected a 3 x H x W image");
  }
  return relu(conv2d(relu(conv2d(image, e.kernel1, 1, 1)), e.kernel2, 1, 1));
}

GeneratorLoss total_loss(const Tensor& output, const Tensor& target,
                         const Tensor& appearance_fake_logits, const Tensor& shape_fake_logits,
                         const LossWeights& weights, const PerceptualExtractor& extractor) {
  if (output.shape() != target.shape()) {
    throw ShapeError("total_loss: output " + shape_str(output.shape()) + " vs target " +
                     shape_str(target.shape()));
  }
  GeneratorLoss loss;
  loss.gan = bce_with_logits(appearance_fake_logits, 1.0) + bce_with_logits(shape_fake_logits, 1.0);
  loss.l1 = mean(abs(output - target));
  loss.per = mean(square(perceptual_features(output, extractor) -
                         perceptual_features(target.detach(), extractor)));
  for (const auto& [name, value] : {std::pair{"gan", &loss.gan}, std::pair{"l1", &loss.l1},
                                    std::pair{"per", &loss.per}}) {
    if (!std::isfinite(value->item())) {
      throw NumericError(std::string("total_loss: non-finite ") + name + " component");
    }
  }
  loss.total = scale(loss.gan, weights.gan) + scale(loss.l1, weights.l1) + scale(loss.per, weights.per);
  return loss;
}

}  // namespace bgg
