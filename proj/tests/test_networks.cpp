#include <gtest/gtest.h>

#include <cmath>

#include "bgg/grad_check.hpp"
#include "bgg/networks.hpp"
#include "bgg/training.hpp"

using namespace bgg;

namespace {

GeneratorConfig tiny(Variant v) {
  GeneratorConfig c;
  c.blocks = 2;
  c.channels = 16;
  c.nodes = 4;
  c.height = 16;
  c.width = 16;
  c.variant = v;
  c.disc_channels = 8;
  return c;
}

Example tiny_example(std::uint64_t seed, std::size_t size = 16) {
  const auto pair = make_pair(seed, 0, size, size, Split::train);
  Example ex;
  ex.name = pair.stem;
  ex.source = image_to_tensor(pair.image_a, -1, 1);
  ex.target = image_to_tensor(pair.image_b, -1, 1);
  ex.source_pose = joints_to_heatmap(pair.skel_a, size, size, 2.0);
  ex.target_pose = joints_to_heatmap(pair.skel_b, size, size, 2.0);
  ex.target_skeleton = pair.skel_b;
  return ex;
}

std::size_t branch_scalars(std::size_t c, std::size_t n, std::size_t cp) {
  return (c * n + n) + (c * cp + cp) + n * n + cp * cp + (cp * c + c);
}

std::size_t decoder_scalars(std::size_t c, std::size_t out) {
  return (c * (c / 2) * 16 + c / 2) + c + ((c / 2) * (c / 4) * 16 + c / 4) + c / 2 + (c / 4 * out * 9 + out);
}

}  // namespace

TEST(Variants, NamesRoundTrip) {
  for (Variant v : {Variant::B1, Variant::B2, Variant::B3, Variant::B4, Variant::B5, Variant::B6, Variant::plus_plus}) {
    EXPECT_EQ(parse_variant(variant_name(v)), v);
  }
  EXPECT_FALSE(parse_variant("B7"));
}

TEST(Config, Validation) {
  GeneratorConfig c = tiny(Variant::B6);
  EXPECT_NO_THROW(c.validate());
  c.blocks = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny(Variant::B6);
  c.height = 18;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Generator, ShapesAndRangesForEveryVariant) {
  const Example ex = tiny_example(1);
  for (Variant v : {Variant::B1, Variant::B2, Variant::B3, Variant::B4, Variant::B5, Variant::B6, Variant::plus_plus}) {
    const auto params = GeneratorParams::make(tiny(v), 3);
    const auto out = infer(params, ex);
    EXPECT_EQ(out.image.shape(), (Shape{3, 16, 16})) << variant_name(v);
    for (double x : out.intermediate.to_vector()) {
      EXPECT_GT(x, -1.0);
      EXPECT_LT(x, 1.0);
    }
    const bool fused = v == Variant::B6 || v == Variant::plus_plus;
    ASSERT_EQ(out.attention.has_value(), fused) << variant_name(v);
    if (fused) {
      EXPECT_EQ(out.attention->shape(), (Shape{1, 16, 16}));
      for (double x : out.attention->to_vector()) {
        EXPECT_GT(x, 0.0);
        EXPECT_LT(x, 1.0);
      }
    } else {
      EXPECT_TRUE(out.image.bit_equal(out.intermediate));
    }
  }
  const auto params = GeneratorParams::make(tiny(Variant::B6), 3);
  EXPECT_THROW(generator_forward(nullptr, Tensor::zeros({3, 8, 8}), ex.source_pose, ex.target_pose, params), ShapeError);
}

TEST(Generator, ParameterCountsFollowTheLadder) {
  const auto count = [](Variant v) { return count_scalars(GeneratorParams::make(tiny(v), 1).parameters()); };
  const std::size_t t = 2, c = 16, n = 4, cp = 8;
  const std::size_t branch = branch_scalars(c, n, cp);
  EXPECT_EQ(count(Variant::B2) - count(Variant::B1), t * branch);
  EXPECT_EQ(count(Variant::B3), count(Variant::B2));
  EXPECT_EQ(count(Variant::B4), count(Variant::B2));
  EXPECT_EQ(count(Variant::B5) - count(Variant::B1), 2 * t * branch);
  EXPECT_EQ(count(Variant::B6) - count(Variant::B5), decoder_scalars(c, 1));
  EXPECT_LT(count(Variant::B1), count(Variant::B6));
}

TEST(Generator, PartSharingKeepsOneParameterSet) {
  const auto count = [](bool share) {
    GeneratorConfig c = tiny(Variant::plus_plus);
    c.share_parts = share;
    return count_scalars(GeneratorParams::make(c, 1).parameters());
  };
  const std::size_t t = 2, c = 16, n = 4, part = c / 2;
  const std::size_t pbgr = 2 * branch_scalars(part, n, part / 2);
  const std::size_t update = ((c + 2 * part) * c + c) + 2 * c + (c * 2 * part + 2 * part);
  EXPECT_TRUE(GeneratorConfig{}.share_parts);
  EXPECT_EQ(count(false) - count(true), t * (kNumParts - 1) * (pbgr + update));
}

TEST(Generator, WiringVisibleInTheTrace) {
  const Example ex = tiny_example(2);
  auto matmuls = [&](Variant v) {
    const auto params = GeneratorParams::make(tiny(v), 1);
    Tape tape;
    generator_forward(&tape, ex.source, ex.source_pose, ex.target_pose, params);
    return tape.count_ops("matmul");
  };
  // Four matrix products per reasoning branch per stage.
  EXPECT_EQ(matmuls(Variant::B1), 0u);
  EXPECT_EQ(matmuls(Variant::B2), 2u * 4);
  EXPECT_EQ(matmuls(Variant::B3), 2u * 4);
  EXPECT_EQ(matmuls(Variant::B4), 2u * 8);
  EXPECT_EQ(matmuls(Variant::B5), 2u * 8);
  EXPECT_EQ(matmuls(Variant::plus_plus), 2u * 18 * 8);
}

TEST(Generator, SharedShapeEncoderAccumulatesBothPaths) {
  DTypeGuard g(DType::f64);
  const Example ex = tiny_example(3);
  const auto params = GeneratorParams::make(tiny(Variant::B5), 4, DType::f64);
  ParamList enc;
  params.shape_encoder.collect(enc);
  ParamList all = params.parameters();
  std::size_t hits = 0;
  for (const auto& p : all) hits += std::count(enc.begin(), enc.end(), p);
  EXPECT_EQ(hits, enc.size());  // one parameter set, listed once

  const Tensor pa = ex.source_pose.to(DType::f64), pb = ex.target_pose.to(DType::f64);
  const Tensor w1 = Tensor::normal({16, 4, 4}, 0, 1, 1), w2 = Tensor::normal({16, 4, 4}, 0, 1, 2);
  Tape joint;
  const auto both = backward(sum(params.shape_encoder.forward(&joint, pa) * w1) +
                             sum(params.shape_encoder.forward(&joint, pb) * w2));
  Tape ta, tb;
  const auto ga = backward(sum(params.shape_encoder.forward(&ta, pa) * w1));
  const auto gb = backward(sum(params.shape_encoder.forward(&tb, pb) * w2));
  for (const auto& p : enc) {
    const auto s = both.wrt(*p).to_vector(), a = ga.wrt(*p).to_vector(), b = gb.wrt(*p).to_vector();
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], a[i] + b[i], 1e-12);
  }
}

TEST(Generator, TotalLossGradientCheck) {
  DTypeGuard g(DType::f64);
  const Example ex = tiny_example(4);
  const auto params = GeneratorParams::make(tiny(Variant::B6), 5);
  const auto disc = Discriminators::make(tiny(Variant::B6), 6);
  const auto extractor = PerceptualExtractor::make(PerceptualExtractor::kDefaultSeed, 8);
  std::vector<Parameter*> raw;
  for (const auto& p : params.parameters()) raw.push_back(p.get());
  GradCheckOptions opt;
  opt.max_coords_per_tensor = 2;
  opt.step = 1e-6;  // small enough that |.| and relu kinks are rarely straddled
  const auto report = check_gradients(
      [&](Tape& tape, std::span<const Tensor> in) {
        const auto out = generator_forward(&tape, in[0], ex.source_pose, ex.target_pose, params);
        const Tensor app = discriminator_logits(nullptr, concat_channels({in[0], out.image}), disc.appearance);
        const Tensor sha = discriminator_logits(nullptr, concat_channels({ex.target_pose, out.image}), disc.shape);
        return total_loss(out.image, ex.target, app, sha, LossWeights{}, extractor).total;
      },
      {ex.source}, raw, opt);
  EXPECT_LT(report.max_rel_error, 1e-3) << report.worst;
  EXPECT_GT(report.coords_checked, 100u);
}

TEST(Discriminator, ExtentsZeroParamsAndChannels) {
  GeneratorConfig cfg = tiny(Variant::B6);
  cfg.height = cfg.width = 64;
  auto d = Discriminators::make(cfg, 1);
  EXPECT_EQ(d.appearance.in_channels(), 6u);
  EXPECT_EQ(d.shape.in_channels(), 21u);
  EXPECT_EQ(discriminator_forward(nullptr, Tensor::zeros({6, 64, 64}), d.appearance).shape(), (Shape{1, 4, 4}));
  EXPECT_THROW(discriminator_forward(nullptr, Tensor::zeros({5, 64, 64}), d.appearance), ShapeError);
  const Tensor x = Tensor::normal({21, 64, 64}, 0, 1, 2);
  EXPECT_TRUE(discriminator_forward(nullptr, x, d.shape).bit_equal(discriminator_forward(nullptr, x, Discriminators::make(cfg, 1).shape)));
  for (const auto& p : d.parameters()) p->value = Tensor::zeros(p->value.shape());
  for (double v : discriminator_forward(nullptr, x, d.shape).to_vector()) EXPECT_EQ(v, 0.5);
}

TEST(Loss, ClosedFormsAndLinearity) {
  DTypeGuard g(DType::f64);
  const auto extractor = PerceptualExtractor::make();
  const Tensor img = Tensor::normal({3, 8, 8}, 0, 0.5, 1);
  const Tensor zero_logits = Tensor::zeros({1, 2, 2});
  const auto same = total_loss(img, img, zero_logits, zero_logits, LossWeights{}, extractor);
  EXPECT_EQ(same.l1.item(), 0.0);
  EXPECT_EQ(same.per.item(), 0.0);
  EXPECT_NEAR(same.gan.item(), 2 * std::log(2.0), 1e-12);
  EXPECT_NEAR(same.gan.item() / 2, 0.6931, 1e-4);

  const Tensor other = Tensor::normal({3, 8, 8}, 0, 0.5, 2);
  LossWeights w;
  const auto base = total_loss(img, other, zero_logits, zero_logits, w, extractor);
  w.l1 *= 2;
  const auto doubled = total_loss(img, other, zero_logits, zero_logits, w, extractor);
  EXPECT_NEAR(doubled.total.item() - base.total.item(), 10.0 * base.l1.item(), 1e-12);

  const Tensor nan_logits = Tensor::constant({1, 2, 2}, std::nan(""));
  try {
    total_loss(img, other, nan_logits, zero_logits, LossWeights{}, extractor);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("gan"), std::string::npos);
  }
}

TEST(Perceptual, FixedDeterministicFeatures) {
  DTypeGuard g(DType::f64);
  const auto e = PerceptualExtractor::make();
  const Tensor img = Tensor::normal({3, 8, 8}, 0, 0.5, 1);
  const Tensor f = perceptual_features(img, e);
  EXPECT_EQ(f.shape(), (Shape{64, 8, 8}));
  EXPECT_TRUE(f.bit_equal(perceptual_features(img, PerceptualExtractor::make())));
  const Tensor moved = perceptual_features(img + Tensor::constant({3, 8, 8}, 0.1), e);
  EXPECT_GT(mean(square(f - moved)).item(), 0.0);
}

TEST(TrainStep, DeterministicInF64) {
  DTypeGuard g(DType::f64);
  const Example ex = tiny_example(5);
  const Example* batch[] = {&ex};
  auto run = [&] {
    auto s = TrainState::create(tiny(Variant::B6), TrainOptions{}, 9);
    for (int i = 0; i < 3; ++i) train_step(s, batch);
    return s;
  };
  const auto a = run(), b = run();
  for (std::size_t i = 0; i < a.generator_params.size(); ++i) {
    EXPECT_TRUE(a.generator_params[i]->value.bit_equal(b.generator_params[i]->value));
  }
  for (std::size_t i = 0; i < a.discriminator_params.size(); ++i) {
    EXPECT_TRUE(a.discriminator_params[i]->value.bit_equal(b.discriminator_params[i]->value));
  }
  EXPECT_EQ(a.step, 3u);
}

TEST(TrainStep, UpdatesAreSeparated) {
  const Example ex = tiny_example(6);
  const Example* batch[] = {&ex};
  auto s = TrainState::create(tiny(Variant::B5), TrainOptions{}, 10);
  std::vector<Tensor> g0, d0;
  for (const auto& p : s.generator_params) g0.push_back(p->value.clone());
  for (const auto& p : s.discriminator_params) d0.push_back(p->value.clone());
  train_step(s, batch);
  std::size_t g_changed = 0, d_changed = 0;
  for (std::size_t i = 0; i < g0.size(); ++i) g_changed += !g0[i].bit_equal(s.generator_params[i]->value);
  for (std::size_t i = 0; i < d0.size(); ++i) d_changed += !d0[i].bit_equal(s.discriminator_params[i]->value);
  EXPECT_GT(g_changed, 0u);
  EXPECT_GT(d_changed, 0u);

  // With a zero objective the generator must not move while the
  // discriminator still does.
  TrainOptions frozen;
  frozen.weights = {0.0, 0.0, 0.0};
  auto z = TrainState::create(tiny(Variant::B5), frozen, 10);
  std::vector<Tensor> zg;
  for (const auto& p : z.generator_params) zg.push_back(p->value.clone());
  train_step(z, batch);
  for (std::size_t i = 0; i < zg.size(); ++i) EXPECT_TRUE(zg[i].bit_equal(z.generator_params[i]->value));
}

TEST(TrainStep, ShortOverfitReducesL1) {
  const Example ex = tiny_example(7);
  const Example* batch[] = {&ex};
  TrainOptions opt;
  opt.adam.lr = 1e-3;
  auto s = TrainState::create(tiny(Variant::B6), opt, 11);
  const double first = train_step(s, batch).l1;
  double last = first;
  for (int i = 0; i < 60; ++i) last = train_step(s, batch).l1;
  EXPECT_LT(last, first);
}
