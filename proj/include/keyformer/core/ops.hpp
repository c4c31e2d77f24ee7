#pragma once

#include <cstddef>
#include <span>

#include "keyformer/core/autograd.hpp"
#include "keyformer/core/rng.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace core {

// Differentiable primitives. Every forward result is checked for finiteness
// and a NumericError naming the operation is thrown otherwise.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, Real factor);
Var add_scalar(const Var& a, Real offset);
/// a[m×n] + bias[n] broadcast over rows.
Var add_row(const Var& a, const Var& bias);

Var matmul(const Var& a, const Var& b);
/// x[m×k] · weight[k×n] + bias[n].
Var linear(const Var& x, const Var& weight, const Var& bias);
Var transpose(const Var& a);

Var relu(const Var& a);
/// log(1 + exp(x)), computed without overflow.
Var softplus(const Var& a);
/// Inverted dropout: survivors scaled by 1/(1-p) when training, identity
/// otherwise. `rng` is only consulted when training with p > 0.
Var dropout(const Var& a, Real p, bool training, Rng* rng);

/// Concatenation of rank-2 tensors along axis 0 (rows) or 1 (columns).
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice_cols(const Var& a, std::size_t start, std::size_t width);

/// x[c×L] -> [c×1], maximum over the length axis.
Var max_pool1d(const Var& x);
Var sum(const Var& a);
Var mean(const Var& a);

/// Softmax along the last axis with max subtraction.
Var softmax(const Var& x);
/// Per-row normalisation of x[m×d] followed by gain[d], bias[d].
Var layer_norm(const Var& x, const Var& gain, const Var& bias, Real eps = Real(1e-5));

/// Cross-correlation of x[c_in×L] with kernels[c_out×c_in×k] plus bias[c_out].
/// Zero "same" padding: floor((k-1)/2) on the left, ceil((k-1)/2) on the
/// right, so the output length equals L for any k, including k > L.
Var conv1d(const Var& x, const Var& kernels, const Var& bias);

/// Euclidean distance between two equally sized tensors, as a scalar.
Var euclidean_distance(const Var& a, const Var& b);

/// Unnormalised Gaussian log-densities, logits[l, g] =
/// -(l - mean_g)^2 / (2 std_g^2) - log(std_g), for positions l in [0, length).
/// The 1/sqrt(2 pi) factor is omitted; it cancels under row normalisation.
Var gaussian_log_density(const Var& means, const Var& stds, std::size_t length);

}  // namespace core
KEYFORMER_END_NAMESPACE
