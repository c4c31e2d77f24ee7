#pragma once

#include <functional>
#include <span>

#include "keyformer/core/autograd.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace core {

/// Largest |analytic - central difference| / max(1, |analytic|) over the
/// coordinates of `x`. Meaningful only in the 64-bit build; at 32 bits the
/// finite differences are dominated by rounding.
double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x,
                  double h = 1e-5);

/// Same measure for a scalar function of externally owned tensors. Each
/// tensor in `inputs` is perturbed in place and restored; `analytic` must hold
/// the matching gradients computed at the unperturbed point. With
/// `max_coordinates` > 0, larger tensors are probed at that many evenly
/// strided coordinates (first and last included) instead of everywhere.
double grad_check_inplace(const std::function<double()>& f, std::span<Tensor* const> inputs,
                          std::span<const Tensor> analytic, double h = 1e-5,
                          std::size_t max_coordinates = 0);

}  // namespace core
KEYFORMER_END_NAMESPACE
