#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "keyformer/core/tensor.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace training {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moments, one tensor per parameter.
struct AdamState {
  std::vector<core::Tensor> m;
  std::vector<core::Tensor> v;
  std::uint64_t step = 0;

  /// Zero moments shaped like `parameters`.
  static AdamState zeros_like(std::span<const core::Tensor* const> parameters);
};

/// One bias-corrected Adam update, computed in double per element:
/// m <- b1 m + (1-b1) g, v <- b2 v + (1-b2) g^2,
/// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
/// Throws DimensionError when shapes disagree.
void adam_step(std::span<core::Tensor* const> parameters, std::span<const core::Tensor> grads,
               AdamState& state, const AdamHyper& hyper);

}  // namespace training
KEYFORMER_END_NAMESPACE
