#pragma once

// Independent reference implementations used as test oracles. They work on
// plain std::vector<double> with straightforward loops and share no code with
// the library kernels.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "bgg/tensor.hpp"

namespace testutil {

using Mat = std::vector<double>;

inline Mat naive_matmul(const Mat& a, const Mat& b, std::size_t m, std::size_t k, std::size_t n) {
  Mat c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  return c;
}

inline Mat naive_transpose(const Mat& a, std::size_t rows, std::size_t cols) {
  Mat t(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  return t;
}

/// Direct cross-correlation with zero padding.
inline bgg::Tensor naive_conv2d(const bgg::Tensor& x, const bgg::Tensor& k, int stride, int pad) {
  const std::size_t ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t co = k.dim(0), kk = k.dim(2);
  const std::size_t oh = (h + 2 * pad - kk) / stride + 1, ow = (w + 2 * pad - kk) / stride + 1;
  const auto xv = x.to_vector(), kv = k.to_vector();
  std::vector<double> out(co * oh * ow, 0.0);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xo = 0; xo < ow; ++xo) {
        double acc = 0.0;
        for (std::size_t c = 0; c < ci; ++c)
          for (std::size_t dy = 0; dy < kk; ++dy)
            for (std::size_t dx = 0; dx < kk; ++dx) {
              const long iy = static_cast<long>(y * stride + dy) - pad;
              const long ix = static_cast<long>(xo * stride + dx) - pad;
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
              acc += xv[(c * h + iy) * w + ix] * kv[((o * ci + c) * kk + dy) * kk + dx];
            }
        out[(o * oh + y) * ow + xo] = acc;
      }
  return bgg::Tensor::from({co, oh, ow}, out, x.dtype());
}

/// 1x1 convolution as W [out x in] * X [in x L] + b.
inline Mat dense_pointwise(const Mat& w, const Mat& b, const Mat& x, std::size_t out, std::size_t in,
                           std::size_t l) {
  Mat y = naive_matmul(w, x, out, in, l);
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t i = 0; i < l; ++i) y[o * l + i] += b[o];
  return y;
}

/// Dense-algebra statement of one bipartite reasoning branch.
///   Hm = theta_w * Xsrc + theta_b                    (N x L)
///   R  = phi_w * Xfeat + phi_b                        (C' x L)
///   V  = Hm * R^T                                     (N x C')
///   M  = (I - A) * V * W                              (N x C')
///   Y  = psi_w * (M^T * Hm) + psi_b + Xfeat           (C x L)
struct DenseBranch {
  std::size_t c, n, cp;
  Mat theta_w, theta_b, phi_w, phi_b, adjacency, edge, psi_w, psi_b;
};

inline Mat dense_branch(const DenseBranch& p, const Mat& feat, const Mat& src, std::size_t l) {
  const Mat hm = dense_pointwise(p.theta_w, p.theta_b, src, p.n, p.c, l);
  const Mat r = dense_pointwise(p.phi_w, p.phi_b, feat, p.cp, p.c, l);
  const Mat v = naive_matmul(hm, naive_transpose(r, p.cp, l), p.n, l, p.cp);
  Mat lap(p.n * p.n);
  for (std::size_t i = 0; i < p.n; ++i)
    for (std::size_t j = 0; j < p.n; ++j) lap[i * p.n + j] = (i == j ? 1.0 : 0.0) - p.adjacency[i * p.n + j];
  const Mat m = naive_matmul(naive_matmul(lap, v, p.n, p.n, p.cp), p.edge, p.n, p.cp, p.cp);
  const Mat back = naive_matmul(naive_transpose(m, p.n, p.cp), hm, p.cp, p.n, l);
  Mat y = dense_pointwise(p.psi_w, p.psi_b, back, p.c, p.cp, l);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += feat[i];
  return y;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("bgg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::FILE* f = std::fopen(p.string().c_str(), "rb");
  if (!f) return {};
  std::string s;
  char buf[65536];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) s.append(buf, n);
  std::fclose(f);
  return s;
}

}  // namespace testutil
