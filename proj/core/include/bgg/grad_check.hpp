#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bgg/tape.hpp"

namespace bgg {

/// Central-difference check of backward(). Relative error per coordinate is
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-3);

struct GradCheckOptions {
  double step = 1e-3;
  /// 0 checks every coordinate; otherwise an evenly strided subset.
  std::size_t max_coords_per_tensor = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst;  // "<input|param name>[index]"
};

/// `f` receives the tape and the (tracked) inputs and must bind any parameter
/// it uses through the tape. Parameters listed in `params` are perturbed in
/// place and restored afterwards.
using TapedScalarFn = std::function<Tensor(Tape&, std::span<const Tensor>)>;

GradCheckReport check_gradients(const TapedScalarFn& f, std::vector<Tensor> inputs,
                                std::span<Parameter* const> params,
                                const GradCheckOptions& options = {});

}  // namespace bgg
