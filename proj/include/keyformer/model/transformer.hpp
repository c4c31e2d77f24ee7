#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "keyformer/core/ops.hpp"
#include "keyformer/data/keystroke.hpp"
#include "keyformer/model/weights.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace model {

using core::Var;

/// Output of the softmax head: non-negative, sums to one.
struct Embedding {
  std::vector<Real> values;

  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Per-pass state. Dropout draws from `rng` in training mode only.
struct ForwardContext {
  core::ParameterTape& tape;
  bool training = false;
  core::Rng* rng = nullptr;
};

/// Effective standard deviations softplus(raw) + kStdFloor.
Var range_stds(const RangeEncodingWeights& enc, core::ParameterTape& tape);

/// length×G matrix of Gaussian PDF responses with each row L1-normalised.
/// Evaluated as a softmax over log-densities, so rows stay normalised even
/// when every density underflows.
Var gaussian_range_pdf(const RangeEncodingWeights& enc, std::size_t length,
                       core::ParameterTape& tape);

/// Normalised PDF matrix times the range embeddings: length×d_model.
Var gaussian_range_encode(const RangeEncodingWeights& enc, std::size_t length,
                          core::ParameterTape& tape);

/// Unmasked multi-head scaled dot-product self-attention over the rows of
/// x[T×d_model], heads concatenated then projected.
Var multi_head_attention(const Var& x, const AttentionWeights& w, std::size_t heads,
                         core::ParameterTape& tape);

/// Parallel same-padded convolutions over the token axis, ReLU each, summed,
/// then normalised (unless disabled) and dropped out. Shape-preserving.
Var multi_scale_cnn(const Var& x, const EncoderLayerWeights& w, const ModelConfig& config,
                    ForwardContext& ctx);

/// z = Norm(y + MSC(y)) with y = Norm(x + MHA(x)).
Var encoder_layer(const Var& x, const EncoderLayerWeights& w, std::size_t heads,
                  const ModelConfig& config, ForwardContext& ctx);

/// Conv/ReLU/dropout stack over the token axis of x[T×d_model], then
/// max-pooling over tokens: returns d_model×1.
Var conv_head(const Var& x, std::span<const ConvWeights> head, const ModelConfig& config,
              ForwardContext& ctx);

/// Both branches, concatenation, final linear layer and softmax: 1×S.
/// `features` is L×C.
Var forward_embed(const ModelWeights& weights, const ModelConfig& config, const Var& features,
                  ForwardContext& ctx);

/// Inference-mode embedding of one feature sequence.
Embedding embed(const ModelWeights& weights, const ModelConfig& config,
                const data::FeatureSequence& sequence);

/// Euclidean distance; throws DimensionError on size mismatch.
double distance(const Embedding& a, const Embedding& b);

}  // namespace model
KEYFORMER_END_NAMESPACE
