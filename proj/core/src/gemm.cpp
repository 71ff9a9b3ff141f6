#include <Eigen/Core>
#include <cblas.h>

#include <algorithm>
#include <mutex>

#include "kernels.hpp"
#include "tensor_access.hpp"

namespace bgg::kernels {
namespace {

void pin_single_thread() {
  static std::once_flag once;
  std::call_once(once, [] { openblas_set_num_threads(1); });
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc) {
  pin_single_thread();
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb), beta,
              c, static_cast<int>(ldc));
}

// Double precision does not go through cblas_dgemm: OpenBLAS 0.3.20 returns
// wrong products for many shapes with the kernel it auto-selects on recent
// AVX-512 parts (sgemm is unaffected). Eigen's product is used instead.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc) {
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Stride = Eigen::OuterStride<>;
  const auto rows_a = static_cast<Eigen::Index>(trans_a ? k : m), cols_a = static_cast<Eigen::Index>(trans_a ? m : k);
  const auto rows_b = static_cast<Eigen::Index>(trans_b ? n : k), cols_b = static_cast<Eigen::Index>(trans_b ? k : n);
  Eigen::Map<const Mat, 0, Stride> ma(a, rows_a, cols_a, Stride(static_cast<Eigen::Index>(lda)));
  Eigen::Map<const Mat, 0, Stride> mb(b, rows_b, cols_b, Stride(static_cast<Eigen::Index>(ldb)));
  Eigen::Map<Mat, 0, Stride> mc(c, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n),
                                Stride(static_cast<Eigen::Index>(ldc)));
  if (beta == 0.0) {
    mc.setZero();
  } else if (beta != 1.0) {
    mc *= beta;
  }
  if (trans_a && trans_b) {
    mc.noalias() += alpha * ma.transpose() * mb.transpose();
  } else if (trans_a) {
    mc.noalias() += alpha * ma.transpose() * mb;
  } else if (trans_b) {
    mc.noalias() += alpha * ma * mb.transpose();
  } else {
    mc.noalias() += alpha * ma * mb;
  }
}

template <typename T>
void im2col(const T* input, const ConvGeometry& g, T* col) {
  const std::size_t k = g.kernel;
  const std::size_t plane = g.out_h * g.out_w;
  const auto in_h = static_cast<long>(g.in_h);
  const auto in_w = static_cast<long>(g.in_w);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* src = input + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* dst = col + ((c * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(ky);
          T* row = dst + oy * g.out_w;
          if (iy < 0 || iy >= in_h) {
            std::fill(row, row + g.out_w, T{0});
            continue;
          }
          const T* srow = src + iy * in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride - g.pad + static_cast<long>(kx);
            row[ox] = (ix < 0 || ix >= in_w) ? T{0} : srow[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* output) {
  const std::size_t k = g.kernel;
  const std::size_t plane = g.out_h * g.out_w;
  const auto in_h = static_cast<long>(g.in_h);
  const auto in_w = static_cast<long>(g.in_w);
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* dst = output + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* src = col + ((c * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(ky);
          if (iy < 0 || iy >= in_h) continue;
          const T* row = src + oy * g.out_w;
          T* drow = dst + iy * in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride - g.pad + static_cast<long>(kx);
            if (ix >= 0 && ix < in_w) drow[ix] += row[ox];
          }
        }
      }
    }
  }
}

template void im2col<float>(const float*, const ConvGeometry&, float*);
template void im2col<double>(const double*, const ConvGeometry&, double*);
template void col2im<float>(const float*, const ConvGeometry&, float*);
template void col2im<double>(const double*, const ConvGeometry&, double*);

void check_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dtype() != b.dtype()) throw ContractError(std::string(op) + ": dtype mismatch");
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a.clone();
  add_inplace(out, b);
  return out;
}

void add_inplace(Tensor& acc, const Tensor& b) {
  check_same_dtype(acc, b, "add");
  if (acc.numel() != b.numel()) throw ShapeError("accumulate: extent mismatch");
  dispatch(acc.dtype(), [&](auto zero) {
    using T = decltype(zero);
    auto dst = acc.mutable_data<T>();
    auto src = b.data<T>();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  });
}

}  // namespace bgg::kernels
