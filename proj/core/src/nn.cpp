#include "bgg/nn.hpp"

#include <algorithm>
#include <cmath>

#include "kernels.hpp"
#include "tensor_access.hpp"

namespace bgg {

void append_unique(ParamList& list, std::span<const ParameterPtr> extra) {
  for (const auto& p : extra) {
    if (std::find(list.begin(), list.end(), p) == list.end()) list.push_back(p);
  }
}

std::size_t count_scalars(std::span<const ParameterPtr> params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p->value.numel();
  return n;
}

ParamInit::ParamInit(std::uint64_t seed, DType dtype) : seeds_(seed), dtype_(dtype) {}

ParameterPtr ParamInit::normal(std::string name, const Shape& shape, double stddev) {
  const std::uint64_t seed = seeds_();
  return std::make_shared<Parameter>(
      Parameter{std::move(name), Tensor::normal(shape, 0.0, stddev, seed, dtype_)});
}

ParameterPtr ParamInit::zeros(std::string name, const Shape& shape) {
  seeds_();  // keep the stream position independent of the init kind
  return std::make_shared<Parameter>(Parameter{std::move(name), Tensor::zeros(shape, dtype_)});
}

ParameterPtr ParamInit::constant(std::string name, const Shape& shape, double value) {
  seeds_();
  return std::make_shared<Parameter>(
      Parameter{std::move(name), Tensor::constant(shape, value, dtype_)});
}

// ---- convolution layers ------------------------------------------------------

ConvLayer ConvLayer::make(ParamInit& init, const std::string& name, std::size_t c_in,
                          std::size_t c_out, std::size_t k, int stride, int pad) {
  return {init.normal(name + ".weight", {c_out, c_in, k, k}), init.zeros(name + ".bias", {c_out}),
          stride, pad};
}

Tensor ConvLayer::forward(Tape* tape, const Tensor& x) const {
  return add_channel_bias(conv2d(x, use(tape, *kernel), stride, pad), use(tape, *bias));
}

void ConvLayer::collect(ParamList& out) const { append_unique(out, std::array{kernel, bias}); }

ConvTransposeLayer ConvTransposeLayer::make(ParamInit& init, const std::string& name,
                                            std::size_t c_in, std::size_t c_out, std::size_t k,
                                            int stride, int pad) {
  return {init.normal(name + ".weight", {c_in, c_out, k, k}), init.zeros(name + ".bias", {c_out}),
          stride, pad};
}

Tensor ConvTransposeLayer::forward(Tape* tape, const Tensor& x) const {
  return add_channel_bias(conv_transpose2d(x, use(tape, *kernel), stride, pad), use(tape, *bias));
}

void ConvTransposeLayer::collect(ParamList& out) const {
  append_unique(out, std::array{kernel, bias});
}

// ---- instance normalization --------------------------------------------------

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() != 3) throw ShapeError("instance_norm: expected C x H x W, got " + shape_str(x.shape()));
  const std::size_t channels = x.dim(0);
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
    throw ShapeError("instance_norm: affine parameters must have length C");
  }
  kernels::check_same_dtype(x, gamma, "instance_norm");
  kernels::check_same_dtype(x, beta, "instance_norm");
  const std::size_t plane = x.dim(1) * x.dim(2);

  return dispatch(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    auto src = x.data<T>();
    auto gm = gamma.data<T>();
    auto bt = beta.data<T>();
    Tensor xhat = TensorAccess::make<T>(x.shape(), std::vector<T>(x.numel()));
    Tensor out = TensorAccess::make<T>(x.shape(), std::vector<T>(x.numel()));
    std::vector<double> inv_std(channels, 0.0);
    auto xh = xhat.mutable_data<T>();
    auto dst = out.mutable_data<T>();
    for (std::size_t c = 0; c < channels; ++c) {
      const T* row = src.data() + c * plane;
      double mu = 0.0;
      for (std::size_t i = 0; i < plane; ++i) mu += row[i];
      mu /= static_cast<double>(plane);
      double var = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = row[i] - mu;
        var += d * d;
      }
      var /= static_cast<double>(plane);
      const bool degenerate = plane == 1 || var + eps <= 0.0;
      inv_std[c] = degenerate ? 0.0 : 1.0 / std::sqrt(var + eps);
      for (std::size_t i = 0; i < plane; ++i) {
        const double n = (row[i] - mu) * inv_std[c];
        xh[c * plane + i] = static_cast<T>(n);
        dst[c * plane + i] = static_cast<T>(gm[c] * n + bt[c]);
      }
    }
    detail::record(
        "instance_norm", {&x, &gamma, &beta}, out,
        [xhat, gamma = gamma.detach(), inv_std, channels, plane](const Tensor& g, detail::GradSink& s) {
          auto gd = g.data<T>();
          auto xh = xhat.data<T>();
          auto gm = gamma.data<T>();
          const double n = static_cast<double>(plane);
          if (s.needs(0)) {
            Tensor dx = TensorAccess::make<T>(xhat.shape(), std::vector<T>(xhat.numel(), T{0}));
            auto d = dx.mutable_data<T>();
            for (std::size_t c = 0; c < channels; ++c) {
              if (inv_std[c] == 0.0) continue;
              double sum_d = 0.0, sum_dx = 0.0;
              for (std::size_t i = 0; i < plane; ++i) {
                const double dxh = static_cast<double>(gd[c * plane + i]) * gm[c];
                sum_d += dxh;
                sum_dx += dxh * xh[c * plane + i];
              }
              for (std::size_t i = 0; i < plane; ++i) {
                const double dxh = static_cast<double>(gd[c * plane + i]) * gm[c];
                d[c * plane + i] = static_cast<T>(
                    inv_std[c] / n * (n * dxh - sum_d - xh[c * plane + i] * sum_dx));
              }
            }
            s.add(0, std::move(dx));
          }
          if (s.needs(1) || s.needs(2)) {
            std::vector<T> dg(channels), db(channels);
            for (std::size_t c = 0; c < channels; ++c) {
              double a = 0.0, b = 0.0;
              for (std::size_t i = 0; i < plane; ++i) {
                a += static_cast<double>(gd[c * plane + i]) * xh[c * plane + i];
                b += gd[c * plane + i];
              }
              dg[c] = static_cast<T>(a);
              db[c] = static_cast<T>(b);
            }
            if (s.needs(1)) s.add(1, TensorAccess::make<T>({channels}, std::move(dg)));
            if (s.needs(2)) s.add(2, TensorAccess::make<T>({channels}, std::move(db)));
          }
        });
    return out;
  });
}

InstanceNorm InstanceNorm::make(ParamInit& init, const std::string& name, std::size_t channels) {
  return {init.constant(name + ".gamma", {channels}, 1.0), init.zeros(name + ".beta", {channels}),
          1e-5};
}

Tensor InstanceNorm::forward(Tape* tape, const Tensor& x) const {
  return instance_norm(x, use(tape, *gamma), use(tape, *beta), eps);
}

void InstanceNorm::collect(ParamList& out) const { append_unique(out, std::array{gamma, beta}); }

Tensor activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::none: return x;
    case Activation::relu: return relu(x);
    case Activation::leaky_relu: return leaky_relu(x, 0.2);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return tanh(x);
  }
  return x;
}

ConvUnit ConvUnit::make(ParamInit& init, const std::string& name, std::size_t c_in,
                        std::size_t c_out, std::size_t k, int stride, int pad, bool use_norm,
                        Activation act) {
  ConvUnit unit{ConvLayer::make(init, name + ".conv", c_in, c_out, k, stride, pad), std::nullopt, act};
  if (use_norm) unit.norm = InstanceNorm::make(init, name + ".norm", c_out);
  return unit;
}

Tensor ConvUnit::forward(Tape* tape, const Tensor& x) const {
  Tensor y = conv.forward(tape, x);
  if (norm) y = norm->forward(tape, y);
  return activate(y, act);
}

void ConvUnit::collect(ParamList& out) const {
  conv.collect(out);
  if (norm) norm->collect(out);
}

// ---- Adam --------------------------------------------------------------------

AdamState AdamState::create(std::span<const ParameterPtr> params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const auto& p : params) {
    state.m.push_back(Tensor::zeros(p->value.shape(), p->value.dtype()));
    state.v.push_back(Tensor::zeros(p->value.shape(), p->value.dtype()));
  }
  return state;
}

void adam_step(std::span<const ParameterPtr> params, std::span<const Tensor> grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ContractError("adam_step: parameter, gradient and moment counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->value.shape()) {
      throw ShapeError("adam_step: gradient shape mismatch for " + params[i]->name);
    }
    for (double v : grads[i].to_vector()) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient for parameter " + params[i]->name);
    }
  }

  const auto& cfg = state.config;
  const std::uint64_t t = state.step + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    dispatch(params[i]->value.dtype(), [&](auto zero) {
      using T = decltype(zero);
      auto w = params[i]->value.mutable_data<T>();
      auto g = grads[i].data<T>();
      auto m = state.m[i].mutable_data<T>();
      auto v = state.v[i].mutable_data<T>();
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double gj = g[j];
        const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
        const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        const double mhat = mj / bc1;
        const double vhat = vj / bc2;
        w[j] = static_cast<T>(w[j] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
      }
    });
  }
  state.step = t;
}

}  // namespace bgg
