#pragma once

#include <memory>

#include "bgg/tensor.hpp"

namespace bgg {

// Internal accessor used by the tape and kernels.
struct TensorAccess {
  static std::weak_ptr<detail::TapeState>& tape(Tensor& t) { return t.tape_; }
  static const std::weak_ptr<detail::TapeState>& tape(const Tensor& t) { return t.tape_; }
  static int& node(Tensor& t) { return t.node_; }
  static const std::shared_ptr<detail::Buffer>& buffer(const Tensor& t) { return t.buffer_; }

  template <typename T>
  static Tensor make(const Shape& shape, std::vector<T> values) {
    Tensor t;
    t.shape_ = shape;
    t.buffer_ = std::make_shared<detail::Buffer>(std::move(values));
    return t;
  }
  static Tensor share(const Tensor& src, const Shape& shape) {
    Tensor t;
    t.shape_ = shape;
    t.buffer_ = src.buffer_;
    return t;
  }
};

/// Uninitialized-to-zero result buffer of the given dtype.
inline Tensor make_zeros(const Shape& shape, DType dtype) { return Tensor::zeros(shape, dtype); }

}  // namespace bgg
