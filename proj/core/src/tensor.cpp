#include "bgg/tensor.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <random>
#include <sstream>

#include "tensor_access.hpp"

namespace bgg {
namespace {

std::atomic<DType> g_default_dtype{DType::f32};

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  for (auto extent : shape) {
    if (extent == 0) throw ShapeError("zero extent in shape " + shape_str(shape));
  }
}

}  // namespace

DType default_dtype() { return g_default_dtype.load(); }
void set_default_dtype(DType dtype) { g_default_dtype.store(dtype); }

DType configure_dtype_from_env() {
  if (const char* v = std::getenv("BGG_DETERMINISTIC"); v != nullptr && std::string(v) == "1") {
    set_default_dtype(DType::f64);
  }
  return default_dtype();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return shape.empty() ? 0 : n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(const Shape& shape, DType dtype) {
  check_shape(shape);
  const auto n = shape_numel(shape);
  return dispatch(dtype, [&](auto zero) {
    using T = decltype(zero);
    return TensorAccess::make<T>(shape, std::vector<T>(n, T{0}));
  });
}

Tensor Tensor::constant(const Shape& shape, double value, DType dtype) {
  check_shape(shape);
  const auto n = shape_numel(shape);
  return dispatch(dtype, [&](auto zero) {
    using T = decltype(zero);
    return TensorAccess::make<T>(shape, std::vector<T>(n, static_cast<T>(value)));
  });
}

Tensor Tensor::normal(const Shape& shape, double mean, double stddev, std::uint64_t seed,
                      DType dtype) {
  check_shape(shape);
  const auto n = shape_numel(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(mean, stddev);
  std::vector<double> draws(n);
  for (auto& d : draws) d = dist(rng);
  return Tensor::from(shape, draws, dtype);
}

Tensor Tensor::from(const Shape& shape, std::span<const double> values, DType dtype) {
  check_shape(shape);
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     shape_str(shape));
  }
  return dispatch(dtype, [&](auto zero) {
    using T = decltype(zero);
    return TensorAccess::make<T>(shape, std::vector<T>(values.begin(), values.end()));
  });
}

Tensor Tensor::from(const Shape& shape, std::initializer_list<double> values, DType dtype) {
  return from(shape, std::span<const double>(values.begin(), values.size()), dtype);
}

Tensor Tensor::scalar(double value, DType dtype) { return constant({1}, value, dtype); }

DType Tensor::dtype() const {
  if (!buffer_) throw ContractError("dtype() on undefined tensor");
  return std::holds_alternative<std::vector<float>>(*buffer_) ? DType::f32 : DType::f64;
}

double Tensor::at(std::size_t i) const {
  return std::visit([i](const auto& v) { return static_cast<double>(v.at(i)); }, *buffer_);
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor with shape " + shape_str(shape_));
  return at(0);
}

std::vector<double> Tensor::to_vector() const {
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); },
                    *buffer_);
}

void Tensor::set(std::size_t i, double value) {
  std::visit([&](auto& v) { v.at(i) = static_cast<std::decay_t<decltype(v[0])>>(value); },
             *buffer_);
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  t.buffer_ = std::make_shared<detail::Buffer>(*buffer_);
  return t;
}

Tensor Tensor::detach() const { return TensorAccess::share(*this, shape_); }

Tensor Tensor::to(DType target) const {
  if (dtype() == target) return detach();
  return Tensor::from(shape_, to_vector(), target);
}

Tensor Tensor::view_as(const Shape& shape) const {
  if (shape_numel(shape) != numel()) {
    throw ShapeError("cannot view " + shape_str(shape_) + " as " + shape_str(shape));
  }
  return TensorAccess::share(*this, shape);
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (shape_ != other.shape_ || dtype() != other.dtype()) return false;
  return std::visit(
      [&](const auto& v) {
        using V = std::decay_t<decltype(v)>;
        const auto& w = std::get<V>(*other.buffer_);
        return std::memcmp(v.data(), w.data(), v.size() * sizeof(v[0])) == 0;
      },
      *buffer_);
}

}  // namespace bgg
