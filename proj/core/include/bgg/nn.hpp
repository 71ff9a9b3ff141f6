#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bgg/ops.hpp"
#include "bgg/tape.hpp"

namespace bgg {

using ParamList = std::vector<ParameterPtr>;

/// Appends parameters not already present (by identity).
void append_unique(ParamList& list, std::span<const ParameterPtr> extra);
std::size_t count_scalars(std::span<const ParameterPtr> params);

/// Deterministic parameter factory. Each created tensor draws its own seed
/// from a generator seeded once, so construction order fixes every value.
class ParamInit {
 public:
  static constexpr double kWeightStd = 0.02;

  explicit ParamInit(std::uint64_t seed, DType dtype = default_dtype());

  ParameterPtr normal(std::string name, const Shape& shape, double stddev = kWeightStd);
  ParameterPtr zeros(std::string name, const Shape& shape);
  ParameterPtr constant(std::string name, const Shape& shape, double value);
  DType dtype() const { return dtype_; }

 private:
  std::mt19937_64 seeds_;
  DType dtype_;
};

struct ConvLayer {
  ParameterPtr kernel;  // [C_out x C_in x k x k]
  ParameterPtr bias;    // [C_out]
  int stride = 1;
  int pad = 0;

  static ConvLayer make(ParamInit& init, const std::string& name, std::size_t c_in,
                        std::size_t c_out, std::size_t k, int stride, int pad);
  Tensor forward(Tape* tape, const Tensor& x) const;
  std::size_t in_channels() const { return kernel->value.dim(1); }
  std::size_t out_channels() const { return kernel->value.dim(0); }
  void collect(ParamList& out) const;
};

struct ConvTransposeLayer {
  ParameterPtr kernel;  // [C_in x C_out x k x k]
  ParameterPtr bias;    // [C_out]
  int stride = 1;
  int pad = 0;

  static ConvTransposeLayer make(ParamInit& init, const std::string& name, std::size_t c_in,
                                 std::size_t c_out, std::size_t k, int stride, int pad);
  Tensor forward(Tape* tape, const Tensor& x) const;
  void collect(ParamList& out) const;
};

/// Per-channel spatial standardization followed by a per-channel affine map.
/// A 1x1 spatial extent (or a zero-variance channel with eps == 0) yields beta.
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

struct InstanceNorm {
  ParameterPtr gamma;
  ParameterPtr beta;
  double eps = 1e-5;

  static InstanceNorm make(ParamInit& init, const std::string& name, std::size_t channels);
  Tensor forward(Tape* tape, const Tensor& x) const;
  void collect(ParamList& out) const;
};

/// conv -> [instance norm] -> activation, the unit used by encoders and blocks.
enum class Activation { none, relu, leaky_relu, sigmoid, tanh };

Tensor activate(const Tensor& x, Activation act);

struct ConvUnit {
  ConvLayer conv;
  std::optional<InstanceNorm> norm;
  Activation act = Activation::relu;

  static ConvUnit make(ParamInit& init, const std::string& name, std::size_t c_in,
                       std::size_t c_out, std::size_t k, int stride, int pad, bool use_norm,
                       Activation act);
  Tensor forward(Tape* tape, const Tensor& x) const;
  void collect(ParamList& out) const;
};

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

/// Moments are aligned with the parameter list the state was created for.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static AdamState create(std::span<const ParameterPtr> params, const AdamConfig& config);
};

/// One bias-corrected Adam update. All gradients are validated before any
/// parameter is written; a non-finite gradient throws NumericError naming the
/// parameter and leaves params and state untouched.
void adam_step(std::span<const ParameterPtr> params, std::span<const Tensor> grads,
               AdamState& state);

}  // namespace bgg
