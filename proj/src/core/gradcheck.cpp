#include "keyformer/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace core {

namespace {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace

double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double h) {
  Var input = leaf(x, true);
  Var out = f(input);
  if (out.value().size() != 1) throw ContractError("grad_check needs a scalar function");
  backward(out);
  const Tensor analytic = input.grad();

  auto evaluate = [&](const Tensor& point) {
    return static_cast<double>(f(constant(point)).value().item());
  };

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real original = probe[i];
    probe[i] = static_cast<Real>(original + h);
    const double plus = evaluate(probe);
    probe[i] = static_cast<Real>(original - h);
    const double minus = evaluate(probe);
    probe[i] = original;
    worst = std::max(worst, relative_error(analytic[i], (plus - minus) / (2.0 * h)));
  }
  return worst;
}

double grad_check_inplace(const std::function<double()>& f, std::span<Tensor* const> inputs,
                          std::span<const Tensor> analytic, double h,
                          std::size_t max_coordinates) {
  if (inputs.size() != analytic.size()) {
    throw ContractError("grad_check_inplace: inputs and gradients differ in count");
  }
  double worst = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Tensor& target = *inputs[t];
    if (analytic[t].shape() != target.shape()) {
      throw DimensionError("grad_check_inplace: gradient shape " + to_string(analytic[t].shape()) +
                           " vs parameter " + to_string(target.shape()));
    }
    const std::size_t n = target.size();
    const std::size_t probes = max_coordinates == 0 ? n : std::min(n, max_coordinates);
    for (std::size_t p = 0; p < probes; ++p) {
      const std::size_t i = probes == n || probes == 1 ? p : p * (n - 1) / (probes - 1);
      const Real original = target[i];
      target[i] = static_cast<Real>(original + h);
      const double plus = f();
      target[i] = static_cast<Real>(original - h);
      const double minus = f();
      target[i] = original;
      worst = std::max(worst, relative_error(analytic[t][i], (plus - minus) / (2.0 * h)));
    }
  }
  return worst;
}

}  // namespace core
KEYFORMER_END_NAMESPACE
