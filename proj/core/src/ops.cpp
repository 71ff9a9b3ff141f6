#include "bgg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "bgg/tape.hpp"
#include "kernels.hpp"
#include "tensor_access.hpp"

namespace bgg {
namespace {

using detail::GradSink;
using detail::record;

template <typename T>
Tensor empty_like_shape(const Shape& shape) {
  return TensorAccess::make<T>(shape, std::vector<T>(shape_numel(shape)));
}

Tensor empty(const Shape& shape, DType dtype) {
  return dispatch(dtype, [&](auto zero) { return empty_like_shape<decltype(zero)>(shape); });
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (!x.defined() || x.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     (x.defined() ? shape_str(x.shape()) : std::string("undefined")));
  }
}

// ---- raw (untracked) helpers used inside backward rules ----------------------

Tensor raw_matmul(const Tensor& a, bool ta, const Tensor& b, bool tb) {
  const std::size_t m = ta ? a.dim(1) : a.dim(0);
  const std::size_t k = ta ? a.dim(0) : a.dim(1);
  const std::size_t n = tb ? b.dim(0) : b.dim(1);
  Tensor out = empty({m, n}, a.dtype());
  dispatch(a.dtype(), [&](auto zero) {
    using T = decltype(zero);
    kernels::gemm(ta, tb, m, n, k, T{1}, a.data<T>().data(), a.dim(1), b.data<T>().data(),
                  b.dim(1), T{0}, out.mutable_data<T>().data(), n);
  });
  return out;
}

Tensor raw_transpose(const Tensor& a) {
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  Tensor out = empty({cols, rows}, a.dtype());
  dispatch(a.dtype(), [&](auto zero) {
    using T = decltype(zero);
    auto src = a.data<T>();
    auto dst = out.mutable_data<T>();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
  });
  return out;
}

template <typename T, typename Fn>
Tensor map1(const Tensor& x, Fn fn) {
  Tensor out = empty_like_shape<T>(x.shape());
  auto src = x.data<T>();
  auto dst = out.mutable_data<T>();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = fn(src[i]);
  return out;
}

template <typename T, typename Fn>
Tensor map2(const Tensor& a, const Tensor& b, Fn fn) {
  Tensor out = empty_like_shape<T>(a.shape());
  auto x = a.data<T>();
  auto y = b.data<T>();
  auto dst = out.mutable_data<T>();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = fn(x[i], y[i]);
  return out;
}

double raw_sum(const Tensor& x) {
  return dispatch(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    double acc = 0.0;
    for (T v : x.data<T>()) acc += static_cast<double>(v);
    return acc;
  });
}

}  // namespace

// ---- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  kernels::check_same_dtype(a, b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner extents differ: " + shape_str(a.shape()) + " * " +
                     shape_str(b.shape()));
  }
  Tensor out = raw_matmul(a, false, b, false);
  record("matmul", {&a, &b}, out, [a = a.detach(), b = b.detach()](const Tensor& g, GradSink& s) {
    if (s.needs(0)) s.add(0, raw_matmul(g, false, b, true));
    if (s.needs(1)) s.add(1, raw_matmul(a, true, g, false));
  });
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  Tensor out = raw_transpose(a);
  record("transpose", {&a}, out,
         [](const Tensor& g, GradSink& s) { s.add(0, raw_transpose(g)); });
  return out;
}

Tensor eye(std::size_t n, DType dtype) {
  Tensor out = Tensor::zeros({n, n}, dtype);
  for (std::size_t i = 0; i < n; ++i) out.set(i * n + i, 1.0);
  return out;
}

// ---- convolution -------------------------------------------------------------

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, int stride, int pad) {
  if (stride < 1 || pad < 0) throw ShapeError("conv: stride must be >= 1 and pad >= 0");
  const long span = static_cast<long>(in) + 2L * pad - static_cast<long>(kernel);
  if (span < 0 || span % stride != 0) {
    throw ShapeError("conv: non-integral output extent for input " + std::to_string(in) +
                     ", kernel " + std::to_string(kernel) + ", stride " + std::to_string(stride) +
                     ", pad " + std::to_string(pad));
  }
  return static_cast<std::size_t>(span / stride + 1);
}

std::size_t conv_transpose_out_extent(std::size_t in, std::size_t kernel, int stride, int pad) {
  if (stride < 1 || pad < 0) throw ShapeError("conv_transpose: stride must be >= 1 and pad >= 0");
  const long out = (static_cast<long>(in) - 1) * stride - 2L * pad + static_cast<long>(kernel);
  if (out < 1) throw ShapeError("conv_transpose: non-positive output extent");
  return static_cast<std::size_t>(out);
}

namespace {

kernels::ConvGeometry geometry(std::size_t channels, std::size_t in_h, std::size_t in_w,
                               std::size_t k, int stride, int pad) {
  return {channels, in_h, in_w, k, stride, pad, conv_out_extent(in_h, k, stride, pad),
          conv_out_extent(in_w, k, stride, pad)};
}

bool is_pointwise(const kernels::ConvGeometry& g) {
  return g.kernel == 1 && g.stride == 1 && g.pad == 0;
}

void check_kernel(const Tensor& kernel, const char* op) {
  require_rank(kernel, 4, op);
  if (kernel.dim(2) != kernel.dim(3)) throw ShapeError(std::string(op) + ": kernel must be square");
}

// Column buffer for `x` under geometry g (a view of x itself for 1x1 kernels).
template <typename T>
std::shared_ptr<const std::vector<T>> columns(const Tensor& x, const kernels::ConvGeometry& g) {
  auto src = x.data<T>();
  if (is_pointwise(g)) return std::make_shared<const std::vector<T>>(src.begin(), src.end());
  auto col = std::make_shared<std::vector<T>>(g.channels * g.kernel * g.kernel * g.out_h * g.out_w);
  kernels::im2col(src.data(), g, col->data());
  return col;
}

template <typename T>
Tensor from_columns(const std::vector<T>& col, const kernels::ConvGeometry& g) {
  Tensor out = Tensor::zeros({g.channels, g.in_h, g.in_w}, std::is_same_v<T, float> ? DType::f32 : DType::f64);
  if (is_pointwise(g)) {
    std::copy(col.begin(), col.end(), out.mutable_data<T>().begin());
  } else {
    kernels::col2im(col.data(), g, out.mutable_data<T>().data());
  }
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  require_rank(input, 3, "conv2d");
  check_kernel(kernel, "conv2d");
  kernels::check_same_dtype(input, kernel, "conv2d");
  if (kernel.dim(1) != input.dim(0)) {
    throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) + " expects " +
                     std::to_string(kernel.dim(1)) + " input channels, got " +
                     shape_str(input.shape()));
  }
  const std::size_t c_out = kernel.dim(0);
  const auto g = geometry(input.dim(0), input.dim(1), input.dim(2), kernel.dim(2), stride, pad);
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t depth = g.channels * g.kernel * g.kernel;

  return dispatch(input.dtype(), [&](auto zero) {
    using T = decltype(zero);
    auto col = columns<T>(input, g);
    Tensor out = empty_like_shape<T>({c_out, g.out_h, g.out_w});
    kernels::gemm(false, false, c_out, plane, depth, T{1}, kernel.data<T>().data(), depth,
                  col->data(), plane, T{0}, out.mutable_data<T>().data(), plane);
    record("conv2d", {&input, &kernel}, out,
           [col, kernel = kernel.detach(), g, c_out, plane, depth](const Tensor& grad, GradSink& s) {
             const T* gd = grad.data<T>().data();
             if (s.needs(0)) {
               std::vector<T> dcol(depth * plane);
               kernels::gemm(true, false, depth, plane, c_out, T{1}, kernel.data<T>().data(),
                             depth, gd, plane, T{0}, dcol.data(), plane);
               s.add(0, from_columns<T>(dcol, g));
             }
             if (s.needs(1)) {
               Tensor dk = empty_like_shape<T>(kernel.shape());
               kernels::gemm(false, true, c_out, depth, plane, T{1}, gd, plane, col->data(), plane,
                             T{0}, dk.mutable_data<T>().data(), depth);
               s.add(1, std::move(dk));
             }
           });
    return out;
  });
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  require_rank(input, 3, "conv_transpose2d");
  check_kernel(kernel, "conv_transpose2d");
  kernels::check_same_dtype(input, kernel, "conv_transpose2d");
  if (kernel.dim(0) != input.dim(0)) {
    throw ShapeError("conv_transpose2d: kernel " + shape_str(kernel.shape()) + " expects " +
                     std::to_string(kernel.dim(0)) + " input channels, got " +
                     shape_str(input.shape()));
  }
  const std::size_t c_in = input.dim(0);
  const std::size_t c_out = kernel.dim(1);
  const std::size_t k = kernel.dim(2);
  const std::size_t out_h = conv_transpose_out_extent(input.dim(1), k, stride, pad);
  const std::size_t out_w = conv_transpose_out_extent(input.dim(2), k, stride, pad);
  const auto g = geometry(c_out, out_h, out_w, k, stride, pad);
  if (g.out_h != input.dim(1) || g.out_w != input.dim(2)) {
    throw ShapeError("conv_transpose2d: inconsistent geometry");
  }
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t depth = c_out * k * k;

  return dispatch(input.dtype(), [&](auto zero) {
    using T = decltype(zero);
    std::vector<T> col(depth * plane);
    kernels::gemm(true, false, depth, plane, c_in, T{1}, kernel.data<T>().data(), depth,
                  input.data<T>().data(), plane, T{0}, col.data(), plane);
    Tensor out = from_columns<T>(col, g);
    record("conv_transpose2d", {&input, &kernel}, out,
           [input = input.detach(), kernel = kernel.detach(), g, c_in, plane, depth](
               const Tensor& grad, GradSink& s) {
             auto gcol = columns<T>(grad, g);
             if (s.needs(0)) {
               Tensor dx = empty_like_shape<T>(input.shape());
               kernels::gemm(false, false, c_in, plane, depth, T{1}, kernel.data<T>().data(),
                             depth, gcol->data(), plane, T{0}, dx.mutable_data<T>().data(), plane);
               s.add(0, std::move(dx));
             }
             if (s.needs(1)) {
               Tensor dk = empty_like_shape<T>(kernel.shape());
               kernels::gemm(false, true, c_in, depth, plane, T{1}, input.data<T>().data(), plane,
                             gcol->data(), plane, T{0}, dk.mutable_data<T>().data(), depth);
               s.add(1, std::move(dk));
             }
           });
    return out;
  });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 3, "add_channel_bias");
  require_rank(bias, 1, "add_channel_bias");
  kernels::check_same_dtype(x, bias, "add_channel_bias");
  if (bias.dim(0) != x.dim(0)) throw ShapeError("add_channel_bias: bias length != channels");
  const std::size_t channels = x.dim(0);
  const std::size_t plane = x.dim(1) * x.dim(2);
  return dispatch(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    Tensor out = x.clone();
    auto dst = out.mutable_data<T>();
    auto b = bias.data<T>();
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < plane; ++i) dst[c * plane + i] += b[c];
    Tensor result = out.detach();
    record("add_channel_bias", {&x, &bias}, result,
           [channels, plane](const Tensor& g, GradSink& s) {
             if (s.needs(0)) s.add(0, g);
             if (s.needs(1)) {
               Tensor db = empty_like_shape<T>({channels});
               auto gd = g.data<T>();
               auto d = db.mutable_data<T>();
               for (std::size_t c = 0; c < channels; ++c) {
                 T acc{0};
                 for (std::size_t i = 0; i < plane; ++i) acc += gd[c * plane + i];
                 d[c] = acc;
               }
               s.add(1, std::move(db));
             }
           });
    return result;
  });
}

// ---- element-wise ------------------------------------------------------------

Tensor unary(const Tensor& x, UnaryKind kind, double alpha) {
  return dispatch(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const T a = static_cast<T>(alpha);
    Tensor out;
    switch (kind) {
      case UnaryKind::sigmoid:
        out = map1<T>(x, [](T v) { return T{1} / (T{1} + std::exp(-v)); });
        break;
      case UnaryKind::relu:
        out = map1<T>(x, [](T v) { return v > T{0} ? v : T{0}; });
        break;
      case UnaryKind::leaky_relu:
        out = map1<T>(x, [a](T v) { return v > T{0} ? v : a * v; });
        break;
      case UnaryKind::tanh:
        out = map1<T>(x, [](T v) { return std::tanh(v); });
        break;
      case UnaryKind::abs:
        out = map1<T>(x, [](T v) { return std::abs(v); });
        break;
      case UnaryKind::square:
        out = map1<T>(x, [](T v) { return v * v; });
        break;
    }
    static constexpr const char* names[] = {"sigmoid", "relu", "leaky_relu", "tanh", "abs", "square"};
    record(names[static_cast<int>(kind)], {&x}, out,
           [x = x.detach(), y = out.detach(), kind, a](const Tensor& g, GradSink& s) {
             Tensor d;
             switch (kind) {
               case UnaryKind::sigmoid:
                 d = map2<T>(g, y, [](T gv, T yv) { return gv * yv * (T{1} - yv); });
                 break;
               case UnaryKind::relu:
                 d = map2<T>(g, x, [](T gv, T xv) { return xv > T{0} ? gv : T{0}; });
                 break;
               case UnaryKind::leaky_relu:
                 d = map2<T>(g, x, [a](T gv, T xv) { return xv > T{0} ? gv : a * gv; });
                 break;
               case UnaryKind::tanh:
                 d = map2<T>(g, y, [](T gv, T yv) { return gv * (T{1} - yv * yv); });
                 break;
               case UnaryKind::abs:
                 d = map2<T>(g, x, [](T gv, T xv) {
                   return xv > T{0} ? gv : (xv < T{0} ? -gv : T{0});
                 });
                 break;
               case UnaryKind::square:
                 d = map2<T>(g, x, [](T gv, T xv) { return T{2} * xv * gv; });
                 break;
             }
             s.add(0, std::move(d));
           });
    return out;
  });
}

namespace {

template <typename T>
Tensor broadcast_scalar(const Tensor& s, const Shape& shape) {
  return TensorAccess::make<T>(shape, std::vector<T>(shape_numel(shape), s.data<T>()[0]));
}

template <typename T>
Tensor reduce_to(const Tensor& g, const Shape& shape) {
  if (g.shape() == shape) return g;
  T acc{0};
  for (T v : g.data<T>()) acc += v;
  return TensorAccess::make<T>(shape, std::vector<T>{acc});
}

}  // namespace

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind) {
  kernels::check_same_dtype(a, b, "binary");
  const bool same = a.shape() == b.shape();
  if (!same && a.numel() != 1 && b.numel() != 1) {
    throw ShapeError("element-wise op: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const Shape shape = (same || b.numel() == 1) ? a.shape() : b.shape();
  return dispatch(a.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const Tensor lhs = a.shape() == shape ? a.detach() : broadcast_scalar<T>(a, shape);
    const Tensor rhs = b.shape() == shape ? b.detach() : broadcast_scalar<T>(b, shape);
    Tensor out;
    switch (kind) {
      case BinaryKind::add: out = map2<T>(lhs, rhs, [](T x, T y) { return x + y; }); break;
      case BinaryKind::sub: out = map2<T>(lhs, rhs, [](T x, T y) { return x - y; }); break;
      case BinaryKind::mul: out = map2<T>(lhs, rhs, [](T x, T y) { return x * y; }); break;
    }
    static constexpr const char* names[] = {"add", "sub", "mul"};
    record(names[static_cast<int>(kind)], {&a, &b}, out,
           [lhs, rhs, kind, sa = a.shape(), sb = b.shape()](const Tensor& g, GradSink& s) {
             switch (kind) {
               case BinaryKind::add:
                 if (s.needs(0)) s.add(0, reduce_to<T>(g, sa));
                 if (s.needs(1)) s.add(1, reduce_to<T>(g, sb));
                 break;
               case BinaryKind::sub:
                 if (s.needs(0)) s.add(0, reduce_to<T>(g, sa));
                 if (s.needs(1)) s.add(1, reduce_to<T>(map1<T>(g, [](T v) { return -v; }), sb));
                 break;
               case BinaryKind::mul:
                 if (s.needs(0)) s.add(0, reduce_to<T>(map2<T>(g, rhs, [](T x, T y) { return x * y; }), sa));
                 if (s.needs(1)) s.add(1, reduce_to<T>(map2<T>(g, lhs, [](T x, T y) { return x * y; }), sb));
                 break;
             }
           });
    return out;
  });
}

Tensor affine(const Tensor& x, double c, double offset) {
  return dispatch(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const T tc = static_cast<T>(c), to = static_cast<T>(offset);
    Tensor out = map1<T>(x, [tc, to](T v) { return tc * v + to; });
    record("affine", {&x}, out, [tc](const Tensor& g, GradSink& s) {
      s.add(0, map1<T>(g, [tc](T v) { return tc * v; }));
    });
    return out;
  });
}

// ---- reductions --------------------------------------------------------------

Tensor sum(const Tensor& x) {
  Tensor out = Tensor::scalar(raw_sum(x), x.dtype());
  record("sum", {&x}, out, [shape = x.shape()](const Tensor& g, GradSink& s) {
    s.add(0, Tensor::constant(shape, g.item(), g.dtype()));
  });
  return out;
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  Tensor out = Tensor::scalar(raw_sum(x) / n, x.dtype());
  record("mean", {&x}, out, [shape = x.shape(), n](const Tensor& g, GradSink& s) {
    s.add(0, Tensor::constant(shape, g.item() / n, g.dtype()));
  });
  return out;
}

Tensor bce_with_logits(const Tensor& logits, double target) {
  const double n = static_cast<double>(logits.numel());
  return dispatch(logits.dtype(), [&](auto zero) {
    using T = decltype(zero);
    double acc = 0.0;
    for (T z : logits.data<T>()) {
      const double zd = z;
      acc += std::max(zd, 0.0) + std::log1p(std::exp(-std::abs(zd))) - target * zd;
    }
    Tensor out = Tensor::scalar(acc / n, logits.dtype());
    record("bce_with_logits", {&logits}, out,
           [z = logits.detach(), target, n](const Tensor& g, GradSink& s) {
             const double scale = g.item() / n;
             s.add(0, map1<T>(z, [scale, target](T v) {
                     const double sig = 1.0 / (1.0 + std::exp(-static_cast<double>(v)));
                     return static_cast<T>(scale * (sig - target));
                   }));
           });
    return out;
  });
}

// ---- layout ------------------------------------------------------------------

Tensor reshape(const Tensor& x, const Shape& shape) {
  Tensor out = x.view_as(shape);
  record("reshape", {&x}, out, [shape = x.shape()](const Tensor& g, GradSink& s) {
    s.add(0, g.view_as(shape));
  });
  return out;
}

Tensor flatten_spatial(const Tensor& x) {
  require_rank(x, 3, "flatten_spatial");
  return reshape(x, {x.dim(0), x.dim(1) * x.dim(2)});
}

Tensor unflatten_spatial(const Tensor& x, std::size_t height, std::size_t width) {
  require_rank(x, 2, "unflatten_spatial");
  if (x.dim(1) != height * width) throw ShapeError("unflatten_spatial: extent mismatch");
  return reshape(x, {x.dim(0), height, width});
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_channels: no inputs");
  const Tensor& first = parts.front();
  require_rank(first, 3, "concat_channels");
  std::size_t channels = 0;
  for (const auto& p : parts) {
    require_rank(p, 3, "concat_channels");
    kernels::check_same_dtype(first, p, "concat_channels");
    if (p.dim(1) != first.dim(1) || p.dim(2) != first.dim(2)) {
      throw ShapeError("concat_channels: spatial mismatch " + shape_str(first.shape()) + " vs " +
                       shape_str(p.shape()));
    }
    channels += p.dim(0);
  }
  const std::size_t plane = first.dim(1) * first.dim(2);
  return dispatch(first.dtype(), [&](auto zero) {
    using T = decltype(zero);
    Tensor out = empty_like_shape<T>({channels, first.dim(1), first.dim(2)});
    auto dst = out.mutable_data<T>();
    std::size_t offset = 0;
    std::vector<Shape> shapes;
    std::vector<const Tensor*> inputs;
    for (const auto& p : parts) {
      auto src = p.data<T>();
      std::copy(src.begin(), src.end(), dst.begin() + offset);
      offset += src.size();
      shapes.push_back(p.shape());
      inputs.push_back(&p);
    }
    record("concat_channels", inputs, out, [shapes, plane](const Tensor& g, GradSink& s) {
      auto gd = g.data<T>();
      std::size_t off = 0;
      for (std::size_t i = 0; i < shapes.size(); ++i) {
        const std::size_t n = shapes[i][0] * plane;
        if (s.needs(i)) {
          s.add(i, TensorAccess::make<T>(shapes[i], std::vector<T>(gd.begin() + off, gd.begin() + off + n)));
        }
        off += n;
      }
    });
    return out;
  });
}

std::vector<Tensor> split_channels(const Tensor& x, std::span<const std::size_t> sizes) {
  require_rank(x, 3, "split_channels");
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total != x.dim(0)) {
    throw ShapeError("split_channels: sizes sum to " + std::to_string(total) + " but tensor has " +
                     std::to_string(x.dim(0)) + " channels");
  }
  const std::size_t plane = x.dim(1) * x.dim(2);
  return dispatch(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    std::vector<Tensor> outs;
    auto src = x.data<T>();
    std::size_t off = 0;
    for (std::size_t c : sizes) {
      if (c == 0) throw ShapeError("split_channels: zero-size part");
      const std::size_t n = c * plane;
      Tensor part = TensorAccess::make<T>({c, x.dim(1), x.dim(2)},
                                          std::vector<T>(src.begin() + off, src.begin() + off + n));
      record("split_channels", {&x}, part, [shape = x.shape(), off, n](const Tensor& g, GradSink& s) {
        Tensor d = Tensor::zeros(shape, g.dtype());
        auto gd = g.data<T>();
        std::copy(gd.begin(), gd.end(), d.mutable_data<T>().begin() + off);
        s.add(0, std::move(d));
      });
      outs.push_back(std::move(part));
      off += n;
    }
    return outs;
  });
}

Tensor broadcast_channels(const Tensor& x, std::size_t channels) {
  require_rank(x, 3, "broadcast_channels");
  if (x.dim(0) != 1) throw ShapeError("broadcast_channels: input must have one channel");
  const std::size_t plane = x.dim(1) * x.dim(2);
  return dispatch(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    Tensor out = empty_like_shape<T>({channels, x.dim(1), x.dim(2)});
    auto src = x.data<T>();
    auto dst = out.mutable_data<T>();
    for (std::size_t c = 0; c < channels; ++c) std::copy(src.begin(), src.end(), dst.begin() + c * plane);
    record("broadcast_channels", {&x}, out,
           [channels, plane, shape = x.shape()](const Tensor& g, GradSink& s) {
             Tensor d = Tensor::zeros(shape, g.dtype());
             auto gd = g.data<T>();
             auto dd = d.mutable_data<T>();
             for (std::size_t c = 0; c < channels; ++c)
               for (std::size_t i = 0; i < plane; ++i) dd[i] += gd[c * plane + i];
             s.add(0, std::move(d));
           });
    return out;
  });
}

}  // namespace bgg
