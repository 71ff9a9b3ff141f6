#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bgg/tensor.hpp"

namespace bgg {

/// A named learnable tensor. Layers hold parameters through shared_ptr so that
/// weight sharing is a pointer identity, never a copy.
struct Parameter {
  std::string name;
  Tensor value;
};

using ParameterPtr = std::shared_ptr<Parameter>;

class Gradients;

/// Records primitive operations in execution order (inputs always precede the
/// operations that consume them). One forward/backward pass owns one tape.
///
/// A non-recording tape binds parameters as plain constants, which turns every
/// forward pass into inference without touching model code.
class Tape {
 public:
  explicit Tape(bool recording = true);
  ~Tape();
  Tape(Tape&&) noexcept;
  Tape& operator=(Tape&&) noexcept;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const;

  /// Fresh leaf sharing x's buffer.
  Tensor watch(const Tensor& x);
  /// Leaf for a parameter. Binding the same Parameter twice returns the same
  /// leaf, so gradients from every use accumulate into one buffer.
  Tensor bind(const Parameter& p);

  std::size_t op_count() const;
  std::vector<std::string> op_names() const;
  std::size_t count_ops(std::string_view name) const;

 private:
  std::shared_ptr<detail::TapeState> state_;
};

/// Binds through `tape` when given, otherwise returns the raw value.
Tensor use(Tape* tape, const Parameter& p);

/// Reverse-mode sweep from a scalar root.
Gradients backward(const Tensor& root);

class Gradients {
 public:
  /// Gradient with respect to a watched tensor; zeros if it did not influence
  /// the root.
  Tensor wrt(const Tensor& leaf) const;
  Tensor wrt(const Parameter& p) const;
  bool touched(const Parameter& p) const;

 private:
  friend Gradients backward(const Tensor& root);
  std::shared_ptr<detail::TapeState> state_;
  std::vector<Tensor> grads_;
};

namespace detail {

/// Receives input gradients from an operation's backward rule.
class GradSink {
 public:
  explicit GradSink(std::span<const bool> needs) : needs_(needs), out_(needs.size()) {}
  bool needs(std::size_t input) const { return needs_[input]; }
  void add(std::size_t input, Tensor grad);
  std::vector<Tensor>& results() { return out_; }

 private:
  std::span<const bool> needs_;
  std::vector<Tensor> out_;
};

using BackwardFn = std::function<void(const Tensor& grad_out, GradSink& sink)>;

/// Attaches `out` to the tape shared by the tracked inputs and records the
/// backward rule. No-op when no input is tracked.
void record(const char* name, std::initializer_list<const Tensor*> inputs, Tensor& out,
            BackwardFn fn);
void record(const char* name, std::span<const Tensor* const> inputs, Tensor& out,
            BackwardFn fn);

}  // namespace detail
}  // namespace bgg
