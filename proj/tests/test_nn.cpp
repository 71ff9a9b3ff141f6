#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "bgg/grad_check.hpp"
#include "bgg/nn.hpp"

using namespace bgg;

TEST(InstanceNorm, StandardizesEachChannel) {
  DTypeGuard g(DType::f64);
  const Tensor x = Tensor::normal({3, 5, 4}, 2.0, 3.0, 1);
  const Tensor y = instance_norm(x, Tensor::constant({3}, 1), Tensor::zeros({3}), 0.0);
  const auto v = y.to_vector();
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0, sq = 0;
    for (std::size_t i = 0; i < 20; ++i) mean += v[c * 20 + i];
    mean /= 20;
    for (std::size_t i = 0; i < 20; ++i) sq += (v[c * 20 + i] - mean) * (v[c * 20 + i] - mean);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(sq / 20, 1.0, 1e-12);
  }
}

TEST(InstanceNorm, DegenerateExtentReturnsBeta) {
  DTypeGuard g(DType::f64);
  const Tensor beta = Tensor::from({2}, {0.3, -0.7});
  const Tensor y = instance_norm(Tensor::from({2, 1, 1}, {5, 9}), Tensor::constant({2}, 2), beta, 1e-5);
  EXPECT_EQ(y.to_vector(), beta.to_vector());
}

TEST(InstanceNorm, GradientCheck) {
  DTypeGuard g(DType::f64);
  Parameter gamma{"gamma", Tensor::normal({3}, 1, 0.3, 2)};
  Parameter beta{"beta", Tensor::normal({3}, 0, 0.3, 3)};
  const Tensor weights = Tensor::normal({3, 4, 4}, 0, 1, 4);
  Parameter* params[] = {&gamma, &beta};
  const auto report = check_gradients(
      [&](Tape& tape, std::span<const Tensor> in) {
        return sum(instance_norm(in[0], tape.bind(gamma), tape.bind(beta), 1e-5) * weights);
      },
      {Tensor::normal({3, 4, 4}, 0, 1, 5)}, params);
  EXPECT_LT(report.max_rel_error, 1e-3) << report.worst;
}

TEST(Layers, ConvLayerAddsBias) {
  DTypeGuard g(DType::f64);
  ParamInit init(1);
  ConvLayer layer = ConvLayer::make(init, "c", 2, 3, 3, 1, 1);
  layer.bias->value = Tensor::from({3}, {1, 2, 3});
  const Tensor x = Tensor::normal({2, 4, 4}, 0, 1, 9);
  const auto y = layer.forward(nullptr, x).to_vector();
  const auto raw = conv2d(x, layer.kernel->value, 1, 1).to_vector();
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_DOUBLE_EQ(y[i], raw[i] + 1.0 + static_cast<double>(i / 16));
}

TEST(Layers, TransposeLayerDoublesExtent) {
  ParamInit init(2);
  const auto up = ConvTransposeLayer::make(init, "u", 4, 2, 4, 2, 1);
  EXPECT_EQ(up.forward(nullptr, Tensor::zeros({4, 8, 8})).shape(), (Shape{2, 16, 16}));
}

TEST(Layers, ParamInitIsDeterministic) {
  ParamInit a(5), b(5);
  EXPECT_TRUE(a.normal("x", {3, 3})->value.bit_equal(b.normal("x", {3, 3})->value));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  DTypeGuard g(DType::f64);
  auto p = std::make_shared<Parameter>(Parameter{"w", Tensor::from({3}, {1.0, -1.0, 0.5})});
  const ParamList params{p};
  AdamState state = AdamState::create(params, AdamConfig{});
  const std::vector<Tensor> grads{Tensor::from({3}, {0.5, -2.0, 1e-3})};
  adam_step(params, grads, state);
  // Bias-corrected first step: delta = lr * g / (|g| + eps).
  const auto v = p->value.to_vector();
  EXPECT_NEAR(v[0], 1.0 - 2e-4 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(v[1], -1.0 + 2e-4 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_NEAR(v[2], 0.5 - 2e-4 * 1e-3 / (1e-3 + 1e-8), 1e-15);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, NonFiniteGradientLeavesEverythingUntouched) {
  DTypeGuard g(DType::f64);
  auto a = std::make_shared<Parameter>(Parameter{"a", Tensor::from({1}, {1.0})});
  auto b = std::make_shared<Parameter>(Parameter{"b", Tensor::from({1}, {2.0})});
  const ParamList params{a, b};
  AdamState state = AdamState::create(params, AdamConfig{});
  const std::vector<Tensor> grads{Tensor::from({1}, {1.0}),
                                  Tensor::from({1}, {std::numeric_limits<double>::quiet_NaN()})};
  try {
    adam_step(params, grads, state);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find('b'), std::string::npos);
  }
  EXPECT_EQ(a->value.item(), 1.0);
  EXPECT_EQ(state.step, 0u);
}
