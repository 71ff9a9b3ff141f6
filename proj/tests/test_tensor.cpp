#include <gtest/gtest.h>

#include <cmath>

#include "bgg/grad_check.hpp"
#include "bgg/ops.hpp"
#include "bgg/tape.hpp"
#include "test_util.hpp"

using namespace bgg;

TEST(TensorCreate, ZerosConstantNormal) {
  const Tensor z = Tensor::zeros({2, 2});
  EXPECT_EQ(z.to_vector(), (std::vector<double>{0, 0, 0, 0}));
  EXPECT_EQ(Tensor::constant({3}, 1.5).to_vector(), (std::vector<double>{1.5, 1.5, 1.5}));
  const Tensor a = Tensor::normal({4}, 0, 1, 7);
  const Tensor b = Tensor::normal({4}, 0, 1, 7);
  EXPECT_TRUE(a.bit_equal(b));
  EXPECT_FALSE(a.bit_equal(Tensor::normal({4}, 0, 1, 8)));
}

TEST(TensorCreate, InvalidShapes) {
  EXPECT_THROW(Tensor::zeros({}), ShapeError);
  EXPECT_THROW(Tensor::zeros({2, 0}), ShapeError);
  EXPECT_THROW(Tensor::from({3}, {1.0, 2.0}), ShapeError);
}

TEST(TensorCreate, DTypeModes) {
  DTypeGuard g(DType::f64);
  EXPECT_EQ(Tensor::zeros({1}).dtype(), DType::f64);
  EXPECT_EQ(Tensor::zeros({1}, DType::f32).dtype(), DType::f32);
  EXPECT_EQ(Tensor::from({1}, {0.1}).to(DType::f32).at(0), static_cast<double>(0.1f));
}

TEST(Matmul, IdentityAndTripleLoopOracle) {
  DTypeGuard g(DType::f64);
  const Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(matmul(eye(2), x).to_vector(), x.to_vector());
  EXPECT_EQ(matmul(x, Tensor::from({2, 2}, {1, 0, 0, 1})).to_vector(), x.to_vector());
  EXPECT_EQ(matmul(x, Tensor::from({2, 1}, {5, 6})).to_vector(), (std::vector<double>{17, 39}));

  const Tensor a = Tensor::normal({5, 7}, 0, 1, 1);
  const Tensor b = Tensor::normal({7, 3}, 0, 1, 2);
  const auto got = matmul(a, b).to_vector();
  const auto want = testutil::naive_matmul(a.to_vector(), b.to_vector(), 5, 7, 3);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  EXPECT_THROW(matmul(a, a), ShapeError);
}

// Shapes large enough to reach the blocked / vendor kernels, both precisions
// and every transposition the conv and matmul rules use.
TEST(Matmul, LargeShapesMatchOracle) {
  for (DType dt : {DType::f64, DType::f32}) {
    const double tol = dt == DType::f64 ? 1e-10 : 1e-3;
    for (auto [m, k, n] : {std::array<std::size_t, 3>{17, 200, 300}, {64, 33, 1100}, {130, 9, 256}, {4, 336, 16}}) {
      const Tensor a = Tensor::normal({m, k}, 0, 1, m + k, dt);
      const Tensor b = Tensor::normal({k, n}, 0, 1, k + n, dt);
      const auto want = testutil::naive_matmul(a.to_vector(), b.to_vector(), m, k, n);
      auto close = [&](const std::vector<double>& got) {
        double worst = 0;
        for (std::size_t i = 0; i < want.size(); ++i)
          worst = std::max(worst, std::abs(got[i] - want[i]) / (1 + std::abs(want[i])));
        return worst;
      };
      EXPECT_LT(close(matmul(a, b).to_vector()), tol) << m << "x" << k << "x" << n;
      EXPECT_LT(close(transpose(matmul(transpose(b), transpose(a))).to_vector()), tol);
    }
  }
}

TEST(Conv2d, WideKernelGradientMatchesDifferences) {
  DTypeGuard g(DType::f64);
  const Tensor x = Tensor::normal({21, 8, 8}, 0, 1, 1);
  const Tensor w = Tensor::normal({4, 21, 4, 4}, 0, 0.3, 2);
  const Tensor gout = Tensor::normal({4, 4, 4}, 0, 1, 3);
  Tape tape;
  const Tensor wl = tape.watch(w);
  const auto dw = backward(sum(conv2d(x, wl, 2, 1) * gout)).wrt(wl).to_vector();
  double worst = 0;
  for (std::size_t i = 0; i < w.numel(); i += 7) {
    Tensor wp = w.clone(), wm = w.clone();
    wp.set(i, w.at(i) + 1e-6);
    wm.set(i, w.at(i) - 1e-6);
    const double num = (sum(conv2d(x, wp, 2, 1) * gout).item() - sum(conv2d(x, wm, 2, 1) * gout).item()) / 2e-6;
    worst = std::max(worst, std::abs(num - dw[i]));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Matmul, GradientRule) {
  DTypeGuard g(DType::f64);
  Tape tape;
  const Tensor a = tape.watch(Tensor::normal({3, 4}, 0, 1, 3));
  const Tensor b = tape.watch(Tensor::normal({4, 2}, 0, 1, 4));
  const Tensor gout = Tensor::normal({3, 2}, 0, 1, 5);
  const auto grads = backward(sum(matmul(a, b) * gout));
  const auto da = grads.wrt(a).to_vector();
  const auto want_da = testutil::naive_matmul(gout.to_vector(), transpose(b.detach()).to_vector(), 3, 2, 4);
  for (std::size_t i = 0; i < da.size(); ++i) EXPECT_NEAR(da[i], want_da[i], 1e-12);
  const auto db = grads.wrt(b).to_vector();
  const auto want_db = testutil::naive_matmul(transpose(a.detach()).to_vector(), gout.to_vector(), 4, 3, 2);
  for (std::size_t i = 0; i < db.size(); ++i) EXPECT_NEAR(db[i], want_db[i], 1e-12);
}

TEST(Conv2d, HandOracles) {
  DTypeGuard g(DType::f64);
  const Tensor x = Tensor::normal({1, 3, 3}, 0, 1, 1);
  EXPECT_EQ(conv2d(x, Tensor::from({1, 1, 1, 1}, {1}), 1, 0).to_vector(), x.to_vector());
  for (double v : conv2d(x, Tensor::zeros({2, 1, 3, 3}), 1, 1).to_vector()) EXPECT_EQ(v, 0.0);
  const Tensor small = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(conv2d(small, Tensor::constant({1, 1, 2, 2}, 1), 1, 0).to_vector(), (std::vector<double>{10}));
}

TEST(Conv2d, MatchesDirectLoop) {
  DTypeGuard g(DType::f64);
  for (int stride : {1, 2}) {
    const Tensor x = Tensor::normal({3, 8, 8}, 0, 1, 11);
    const Tensor k = Tensor::normal({4, 3, 4, 4}, 0, 1, 12);
    const auto got = conv2d(x, k, stride, 1);
    const auto want = testutil::naive_conv2d(x, k, stride, 1);
    ASSERT_EQ(got.shape(), want.shape());
    const auto gv = got.to_vector(), wv = want.to_vector();
    for (std::size_t i = 0; i < gv.size(); ++i) EXPECT_NEAR(gv[i], wv[i], 1e-12);
  }
}

TEST(Conv2d, NonIntegralExtentRejected) {
  EXPECT_THROW(conv2d(Tensor::zeros({1, 5, 5}), Tensor::zeros({1, 1, 4, 4}), 2, 0), ShapeError);
  EXPECT_THROW(conv2d(Tensor::zeros({2, 5, 5}), Tensor::zeros({1, 1, 3, 3}), 1, 0), ShapeError);
}

TEST(ConvTranspose2d, AdjointIdentity) {
  DTypeGuard g(DType::f64);
  struct Case { std::size_t c_in, c_out, h, k; int stride, pad; };
  for (const auto& c : {Case{2, 3, 8, 4, 2, 1}, Case{3, 2, 7, 3, 1, 1}, Case{1, 2, 6, 2, 2, 0}}) {
    const Tensor x = Tensor::normal({c.c_in, c.h, c.h}, 0, 1, 21);
    const Tensor k = Tensor::normal({c.c_out, c.c_in, c.k, c.k}, 0, 1, 22);
    const Tensor y = Tensor::normal(conv2d(x, k, c.stride, c.pad).shape(), 0, 1, 23);
    const double lhs = sum(conv2d(x, k, c.stride, c.pad) * y).item();
    const double rhs = sum(x * conv_transpose2d(y, k, c.stride, c.pad)).item();
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(ConvTranspose2d, ScatterOracle) {
  DTypeGuard g(DType::f64);
  const Tensor y = conv_transpose2d(Tensor::from({1, 1, 1}, {2.5}), Tensor::constant({1, 1, 2, 2}, 1), 2, 0);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 2}));
  EXPECT_EQ(y.to_vector(), (std::vector<double>{2.5, 2.5, 2.5, 2.5}));
  for (double v : conv_transpose2d(Tensor::zeros({2, 3, 3}), Tensor::normal({2, 2, 3, 3}, 0, 1, 1), 1, 1).to_vector()) {
    EXPECT_EQ(v, 0.0);
  }
  EXPECT_THROW(conv_transpose2d(Tensor::zeros({3, 3, 3}), Tensor::zeros({1, 2, 3, 3}), 1, 1), ShapeError);
}

TEST(Elementwise, UnaryValuesAndGradients) {
  DTypeGuard g(DType::f64);
  EXPECT_EQ(sigmoid(Tensor::scalar(0)).item(), 0.5);
  EXPECT_EQ(relu(Tensor::scalar(-3)).item(), 0.0);
  EXPECT_DOUBLE_EQ(leaky_relu(Tensor::scalar(-2), 0.2).item(), -0.4);
  Tape tape;
  const Tensor x = tape.watch(Tensor::zeros({4}));
  for (double v : backward(sum(sigmoid(x))).wrt(x).to_vector()) EXPECT_EQ(v, 0.25);
}

TEST(Elementwise, BinaryAndBroadcast) {
  DTypeGuard g(DType::f64);
  const Tensor a = Tensor::from({2}, {1, 2});
  EXPECT_EQ((a * Tensor::constant({2}, 1)).to_vector(), a.to_vector());
  EXPECT_EQ((a + Tensor::zeros({2})).to_vector(), a.to_vector());
  EXPECT_EQ((a * Tensor::from({2}, {3, 4})).to_vector(), (std::vector<double>{3, 8}));
  EXPECT_EQ((a * Tensor::scalar(2)).to_vector(), (std::vector<double>{2, 4}));
  EXPECT_THROW(a + Tensor::zeros({3}), ShapeError);

  Tape tape;
  const Tensor x = tape.watch(Tensor::from({2}, {1, 2}));
  const Tensor y = tape.watch(Tensor::from({2}, {3, 4}));
  const auto grads = backward(sum(x * y));
  EXPECT_EQ(grads.wrt(x).to_vector(), (std::vector<double>{3, 4}));
  EXPECT_EQ(grads.wrt(y).to_vector(), (std::vector<double>{1, 2}));
}

TEST(Layout, ConcatSplitFlatten) {
  DTypeGuard g(DType::f64);
  const Tensor a = Tensor::normal({2, 4, 4}, 0, 1, 1);
  const Tensor b = Tensor::normal({3, 4, 4}, 0, 1, 2);
  EXPECT_EQ(concat_channels({a}).to_vector(), a.to_vector());
  const Tensor ab = concat_channels({a, b});
  EXPECT_EQ(ab.shape(), (Shape{5, 4, 4}));
  const auto parts = split_channels(ab, {2, 3});
  EXPECT_TRUE(parts[0].bit_equal(a));
  EXPECT_TRUE(parts[1].bit_equal(b));
  EXPECT_THROW(concat_channels({a, Tensor::zeros({1, 4, 5})}), ShapeError);

  const Tensor img = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(flatten_spatial(img).shape(), (Shape{1, 4}));
  EXPECT_EQ(flatten_spatial(img).to_vector(), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_TRUE(unflatten_spatial(flatten_spatial(a), 4, 4).bit_equal(a));

  Tape tape;
  const Tensor x = tape.watch(a);
  for (double v : backward(sum(flatten_spatial(x))).wrt(x).to_vector()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, ClosedForms) {
  DTypeGuard g(DType::f64);
  Tape tape;
  const Tensor x = tape.watch(Tensor::from({3}, {1, -2, 0.5}));
  const Tensor unused = tape.watch(Tensor::from({2}, {7, 8}));
  const auto grads = backward(sum(square(x)));
  EXPECT_EQ(grads.wrt(x).to_vector(), (std::vector<double>{2, -4, 1}));
  EXPECT_EQ(grads.wrt(unused).to_vector(), (std::vector<double>{0, 0}));
  EXPECT_THROW(backward(square(x)), ContractError);
}

TEST(Backward, ConvSigmoidSumFiniteDifference) {
  DTypeGuard g(DType::f64);
  const Tensor k = Tensor::normal({2, 3, 3, 3}, 0, 0.5, 31);
  const double err = grad_check([&](const Tensor& x) { return sum(sigmoid(conv2d(x, k, 1, 1))); },
                                Tensor::normal({3, 5, 5}, 0, 1, 32), 1e-3);
  EXPECT_LT(err, 1e-4);
}

TEST(GradCheck, LinearAndCubic) {
  DTypeGuard g(DType::f64);
  const Tensor w = Tensor::from({3}, {0.5, -1.5, 2.0});
  EXPECT_LT(grad_check([&](const Tensor& x) { return sum(x * w); }, Tensor::from({3}, {1, 2, 3})), 1e-10);

  Tape tape;
  const Tensor x = tape.watch(Tensor::from({2}, {1, 2}));
  const auto dx = backward(sum(x * x * x)).wrt(x).to_vector();
  EXPECT_NEAR(dx[0], 3.0, 1e-12);
  EXPECT_NEAR(dx[1], 12.0, 1e-12);
  EXPECT_LT(grad_check([](const Tensor& v) { return sum(v * v * v); }, Tensor::from({2}, {1, 2})), 1e-6);
}

TEST(Determinism, F64RunsAreBitIdentical) {
  DTypeGuard g(DType::f64);
  auto run = [] {
    Tape tape;
    const Tensor x = tape.watch(Tensor::normal({3, 9, 9}, 0, 1, 5));
    const Tensor k = tape.watch(Tensor::normal({4, 3, 3, 3}, 0, 1, 6));
    const Tensor loss = sum(tanh(conv2d(x, k, 2, 1)));
    return backward(loss).wrt(k);
  };
  EXPECT_TRUE(run().bit_equal(run()));
}

TEST(Tape, SharedParameterAccumulates) {
  DTypeGuard g(DType::f64);
  Parameter p{"w", Tensor::from({2}, {1, 2})};
  Tape tape;
  const Tensor first = tape.bind(p);
  const Tensor second = tape.bind(p);
  EXPECT_EQ(first.node_id(), second.node_id());
  const auto grads = backward(sum(first * Tensor::from({2}, {3, 4})) + sum(second));
  EXPECT_EQ(grads.wrt(p).to_vector(), (std::vector<double>{4, 5}));
  EXPECT_EQ(use(nullptr, p).tracked(), false);
}
