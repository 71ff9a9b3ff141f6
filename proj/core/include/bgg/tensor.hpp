#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bgg/errors.hpp"

namespace bgg {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

/// Process-wide dtype used by factory functions. f64 is the verification mode:
/// every kernel runs sequentially with a fixed reduction order, so results are
/// bitwise reproducible.
DType default_dtype();
void set_default_dtype(DType dtype);

/// Switches to f64 when BGG_DETERMINISTIC=1 is set in the environment.
/// Returns the resulting default dtype.
DType configure_dtype_from_env();

/// RAII override of the default dtype (used by tests and grad checks).
class DTypeGuard {
 public:
  explicit DTypeGuard(DType dtype) : saved_(default_dtype()) { set_default_dtype(dtype); }
  ~DTypeGuard() { set_default_dtype(saved_); }
  DTypeGuard(const DTypeGuard&) = delete;
  DTypeGuard& operator=(const DTypeGuard&) = delete;

 private:
  DType saved_;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TapeState;
using Buffer = std::variant<std::vector<float>, std::vector<double>>;
}  // namespace detail

/// Dense row-major tensor. Copies share the underlying buffer; use clone()
/// for an independent copy. A tensor may be attached to a Tape, in which case
/// operations consuming it are recorded for reverse-mode differentiation.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, DType dtype = default_dtype());
  static Tensor constant(const Shape& shape, double value, DType dtype = default_dtype());
  /// Normal samples from a dedicated generator seeded with `seed`; identical
  /// (seed, shape, dtype) always produce identical buffers.
  static Tensor normal(const Shape& shape, double mean, double stddev, std::uint64_t seed,
                       DType dtype = default_dtype());
  static Tensor from(const Shape& shape, std::span<const double> values,
                     DType dtype = default_dtype());
  static Tensor from(const Shape& shape, std::initializer_list<double> values,
                     DType dtype = default_dtype());
  static Tensor scalar(double value, DType dtype = default_dtype());

  bool defined() const { return buffer_ != nullptr; }
  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return shape_numel(shape_); }
  DType dtype() const;

  template <typename T>
  std::span<const T> data() const {
    return std::get<std::vector<T>>(*buffer_);
  }
  /// Writable view. Only valid for tensors that are not being differentiated
  /// through (parameters between steps, freshly created buffers).
  template <typename T>
  std::span<T> mutable_data() {
    return std::get<std::vector<T>>(*buffer_);
  }

  double at(std::size_t flat_index) const;
  double item() const;
  std::vector<double> to_vector() const;
  void set(std::size_t flat_index, double value);

  Tensor clone() const;
  /// Same values, never attached to a tape.
  Tensor detach() const;
  Tensor to(DType dtype) const;

  bool tracked() const;
  int node_id() const { return node_; }

  /// Same buffer reinterpreted with a new shape (numel must match). Untracked.
  Tensor view_as(const Shape& shape) const;

  bool bit_equal(const Tensor& other) const;

 private:
  friend class Tape;
  friend struct TensorAccess;

  std::shared_ptr<detail::Buffer> buffer_;
  Shape shape_;
  std::weak_ptr<detail::TapeState> tape_;
  int node_ = -1;
};

/// Dispatch helper: calls fn(T{}) with T = float or double per dtype.
template <typename Fn>
decltype(auto) dispatch(DType dtype, Fn&& fn) {
  if (dtype == DType::f32) return fn(float{});
  return fn(double{});
}

}  // namespace bgg
