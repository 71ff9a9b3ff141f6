#include "bgg/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace bgg {
namespace {

double rel_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t limit) {
  std::vector<std::size_t> idx;
  if (limit == 0 || limit >= n) {
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  const double stride = static_cast<double>(n) / static_cast<double>(limit);
  for (std::size_t i = 0; i < limit; ++i) idx.push_back(static_cast<std::size_t>(i * stride));
  return idx;
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  auto report = check_gradients(
      [&f](Tape&, std::span<const Tensor> in) { return f(in[0]); }, {x}, {}, {h, 0});
  return report.max_rel_error;
}

GradCheckReport check_gradients(const TapedScalarFn& f, std::vector<Tensor> inputs,
                                std::span<Parameter* const> params,
                                const GradCheckOptions& options) {
  GradCheckReport report;
  const double h = options.step;

  Tape tape;
  std::vector<Tensor> tracked;
  for (const auto& x : inputs) tracked.push_back(tape.watch(x));
  Tensor root = f(tape, tracked);
  Gradients grads = backward(root);

  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Tape plain(false);
    return f(plain, xs).item();
  };

  auto consider = [&](double analytic, double numeric, const std::string& label) {
    const double err = rel_error(analytic, numeric);
    ++report.coords_checked;
    if (report.worst.empty() || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst = label;
    }
  };

  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const Tensor analytic = grads.wrt(tracked[t]);
    for (std::size_t i : pick_coords(inputs[t].numel(), options.max_coords_per_tensor)) {
      std::vector<Tensor> xs;
      for (const auto& x : inputs) xs.push_back(x.clone());
      const double base = inputs[t].at(i);
      xs[t].set(i, base + h);
      const double up = evaluate(xs);
      xs[t].set(i, base - h);
      const double down = evaluate(xs);
      consider(analytic.at(i), (up - down) / (2.0 * h),
               "input" + std::to_string(t) + "[" + std::to_string(i) + "]");
    }
  }

  std::vector<Tensor> plain_inputs;
  for (const auto& x : inputs) plain_inputs.push_back(x.detach());
  for (Parameter* p : params) {
    const Tensor analytic = grads.wrt(*p);
    const Tensor saved = p->value.clone();
    for (std::size_t i : pick_coords(p->value.numel(), options.max_coords_per_tensor)) {
      const double base = saved.at(i);
      p->value.set(i, base + h);
      const double up = evaluate(plain_inputs);
      p->value.set(i, base - h);
      const double down = evaluate(plain_inputs);
      p->value.set(i, base);
      consider(analytic.at(i), (up - down) / (2.0 * h), p->name + "[" + std::to_string(i) + "]");
    }
  }
  return report;
}

}  // namespace bgg
