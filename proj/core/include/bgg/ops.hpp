#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bgg/tensor.hpp"

// Differentiable primitives. Every function records itself on the tape of its
// tracked inputs. Images and feature maps are channels-first (C x H x W).
// There is no implicit broadcasting apart from scalar (numel == 1) operands of
// the element-wise binary ops.

namespace bgg {

// ---- linear algebra --------------------------------------------------------

/// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// 2-D transpose.
Tensor transpose(const Tensor& a);
/// Constant n x n identity.
Tensor eye(std::size_t n, DType dtype = default_dtype());

// ---- convolution -----------------------------------------------------------

/// Output extent of a strided convolution; throws ShapeError if non-integral.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, int stride, int pad);
/// Output extent of the matching transposed convolution.
std::size_t conv_transpose_out_extent(std::size_t in, std::size_t kernel, int stride, int pad);

/// Cross-correlation. input [C_in x H x W], kernel [C_out x C_in x k x k].
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad);

/// Adjoint of conv2d with the same kernel tensor and parameters:
/// input [C_out x H' x W'], kernel [C_out x C_in x k x k] -> [C_in x H x W]
/// with H = (H' - 1) * stride - 2 * pad + k.
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, int stride, int pad);

/// x [C x H x W] plus bias [C] broadcast over each channel plane.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

// ---- element-wise ----------------------------------------------------------

enum class UnaryKind { sigmoid, relu, leaky_relu, tanh, abs, square };

Tensor unary(const Tensor& x, UnaryKind kind, double alpha = 0.2);
inline Tensor sigmoid(const Tensor& x) { return unary(x, UnaryKind::sigmoid); }
inline Tensor relu(const Tensor& x) { return unary(x, UnaryKind::relu); }
inline Tensor leaky_relu(const Tensor& x, double alpha) {
  return unary(x, UnaryKind::leaky_relu, alpha);
}
inline Tensor tanh(const Tensor& x) { return unary(x, UnaryKind::tanh); }
inline Tensor abs(const Tensor& x) { return unary(x, UnaryKind::abs); }
inline Tensor square(const Tensor& x) { return unary(x, UnaryKind::square); }

enum class BinaryKind { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind);
inline Tensor operator+(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::add); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::sub); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::mul); }

/// c * x + offset
Tensor affine(const Tensor& x, double c, double offset = 0.0);
inline Tensor scale(const Tensor& x, double c) { return affine(x, c, 0.0); }

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Mean binary cross-entropy of sigmoid(logits) against a constant target.
Tensor bce_with_logits(const Tensor& logits, double target);

// ---- layout ----------------------------------------------------------------

Tensor reshape(const Tensor& x, const Shape& shape);
/// [C x H x W] -> [C x (H*W)], row-major.
Tensor flatten_spatial(const Tensor& x);
/// [C x (H*W)] -> [C x H x W].
Tensor unflatten_spatial(const Tensor& x, std::size_t height, std::size_t width);

Tensor concat_channels(std::span<const Tensor> parts);
inline Tensor concat_channels(std::initializer_list<Tensor> parts) {
  return concat_channels(std::span<const Tensor>(parts.begin(), parts.size()));
}
std::vector<Tensor> split_channels(const Tensor& x, std::span<const std::size_t> sizes);
inline std::vector<Tensor> split_channels(const Tensor& x, std::initializer_list<std::size_t> sizes) {
  return split_channels(x, std::span<const std::size_t>(sizes.begin(), sizes.size()));
}
/// [1 x H x W] -> [C x H x W]
Tensor broadcast_channels(const Tensor& x, std::size_t channels);

}  // namespace bgg
