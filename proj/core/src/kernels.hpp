#pragma once

// Raw numeric kernels shared by the differentiable ops. Nothing here touches
// the tape.

#include <cstddef>

#include "bgg/tensor.hpp"

namespace bgg::kernels {

/// Row-major C = alpha * op(A) * op(B) + beta * C, single-threaded.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc);
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc);

struct ConvGeometry {
  std::size_t channels;
  std::size_t in_h, in_w;
  std::size_t kernel;
  int stride, pad;
  std::size_t out_h, out_w;
};

/// col[(c*k + ky)*k + kx][oy*out_w + ox] = input[c][oy*s - p + ky][ox*s - p + kx]
template <typename T>
void im2col(const T* input, const ConvGeometry& g, T* col);
/// Adjoint of im2col: scatters columns back, accumulating into `output`
/// (which must be zeroed by the caller).
template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* output);

Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& acc, const Tensor& b);

void check_same_dtype(const Tensor& a, const Tensor& b, const char* op);

}  // namespace bgg::kernels
