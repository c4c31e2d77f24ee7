#include "keyformer/training/adam.hpp"

#include <cmath>

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace training {

AdamState AdamState::zeros_like(std::span<const core::Tensor* const> parameters) {
  AdamState state;
  for (const core::Tensor* p : parameters) {
    state.m.push_back(core::Tensor::zeros(p->shape()));
    state.v.push_back(core::Tensor::zeros(p->shape()));
  }
  return state;
}

void adam_step(std::span<core::Tensor* const> parameters, std::span<const core::Tensor> grads,
               AdamState& state, const AdamHyper& hyper) {
  if (grads.size() != parameters.size() || state.m.size() != parameters.size() ||
      state.v.size() != parameters.size()) {
    throw DimensionError("adam_step: " + std::to_string(parameters.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, " +
                         std::to_string(state.m.size()) + " moment tensors");
  }
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    const core::Shape& shape = parameters[i]->shape();
    if (grads[i].shape() != shape || state.m[i].shape() != shape || state.v[i].shape() != shape) {
      throw DimensionError("adam_step: parameter " + std::to_string(i) + " has shape " +
                           core::to_string(shape) + " but gradient " +
                           core::to_string(grads[i].shape()));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    Real* theta = parameters[i]->raw();
    Real* m = state.m[i].raw();
    Real* v = state.v[i].raw();
    const Real* g = grads[i].raw();
    for (std::size_t k = 0; k < parameters[i]->size(); ++k) {
      const double gk = g[k];
      const double mk = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * gk;
      const double vk = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * gk * gk;
      m[k] = static_cast<Real>(mk);
      v[k] = static_cast<Real>(vk);
      const double update =
          hyper.learning_rate * (mk / correction1) / (std::sqrt(vk / correction2) + hyper.epsilon);
      if (update != 0.0) theta[k] = static_cast<Real>(theta[k] - update);
    }
  }
}

}  // namespace training
KEYFORMER_END_NAMESPACE
