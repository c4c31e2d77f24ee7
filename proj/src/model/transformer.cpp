#include "keyformer/model/transformer.hpp"

#include <cmath>

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace model {

namespace {

Var apply_linear(const Var& x, const LinearWeights& w, core::ParameterTape& tape) {
  return core::linear(x, tape(w.weight), tape(w.bias));
}

Var apply_norm(const Var& x, const NormWeights& w, const ModelConfig& config,
               core::ParameterTape& tape) {
  return core::layer_norm(x, tape(w.gain), tape(w.bias), static_cast<Real>(config.norm_epsilon));
}

/// Input projection, additive range encoding, then the encoder stack.
Var run_branch(const Var& tokens, const BranchWeights& branch, std::size_t heads,
               const ModelConfig& config, ForwardContext& ctx) {
  const std::size_t count = tokens.shape()[0];
  Var x = apply_linear(tokens, branch.input, ctx.tape);
  x = core::add(x, gaussian_range_encode(branch.encoding, count, ctx.tape));
  for (const EncoderLayerWeights& layer : branch.layers) {
    x = encoder_layer(x, layer, heads, config, ctx);
  }
  return conv_head(x, branch.head, config, ctx);
}

}  // namespace

Var range_stds(const RangeEncodingWeights& enc, core::ParameterTape& tape) {
  return core::add_scalar(core::softplus(tape(enc.raw_stds)), static_cast<Real>(kStdFloor));
}

Var gaussian_range_pdf(const RangeEncodingWeights& enc, std::size_t length,
                       core::ParameterTape& tape) {
  Var logits = core::gaussian_log_density(tape(enc.means), range_stds(enc, tape), length);
  return core::softmax(logits);
}

Var gaussian_range_encode(const RangeEncodingWeights& enc, std::size_t length,
                          core::ParameterTape& tape) {
  return core::matmul(gaussian_range_pdf(enc, length, tape), tape(enc.range_embeddings));
}

Var multi_head_attention(const Var& x, const AttentionWeights& w, std::size_t heads,
                         core::ParameterTape& tape) {
  const std::size_t width = x.shape()[1];
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("attention width " + std::to_string(width) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const std::size_t head_width = width / heads;
  const Real inv_sqrt = Real(1) / std::sqrt(static_cast<Real>(head_width));
  Var q = apply_linear(x, w.query, tape);
  Var k = apply_linear(x, w.key, tape);
  Var v = apply_linear(x, w.value, tape);
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t start = h * head_width;
    Var qh = core::slice_cols(q, start, head_width);
    Var kh = core::slice_cols(k, start, head_width);
    Var vh = core::slice_cols(v, start, head_width);
    Var scores = core::scale(core::matmul(qh, core::transpose(kh)), inv_sqrt);
    outputs.push_back(core::matmul(core::softmax(scores), vh));
  }
  Var merged = heads == 1 ? outputs.front() : core::concat(outputs, 1);
  return apply_linear(merged, w.output, tape);
}

Var multi_scale_cnn(const Var& x, const EncoderLayerWeights& w, const ModelConfig& config,
                    ForwardContext& ctx) {
  Var channels_first = core::transpose(x);
  Var total;
  for (const ConvWeights& conv : w.scales) {
    Var branch =
        core::relu(core::conv1d(channels_first, ctx.tape(conv.kernel), ctx.tape(conv.bias)));
    total = total ? core::add(total, branch) : branch;
  }
  Var y = core::transpose(total);
  if (config.scale_normalisation) y = apply_norm(y, w.scale_norm, config, ctx.tape);
  return core::dropout(y, static_cast<Real>(config.scale_dropout), ctx.training, ctx.rng);
}

Var encoder_layer(const Var& x, const EncoderLayerWeights& w, std::size_t heads,
                  const ModelConfig& config, ForwardContext& ctx) {
  Var y = apply_norm(core::add(x, multi_head_attention(x, w.attention, heads, ctx.tape)),
                     w.attention_norm, config, ctx.tape);
  return apply_norm(core::add(y, multi_scale_cnn(y, w, config, ctx)), w.output_norm, config,
                    ctx.tape);
}

Var conv_head(const Var& x, std::span<const ConvWeights> head, const ModelConfig& config,
              ForwardContext& ctx) {
  Var y = core::transpose(x);
  for (const ConvWeights& conv : head) {
    y = core::relu(core::conv1d(y, ctx.tape(conv.kernel), ctx.tape(conv.bias)));
    y = core::dropout(y, static_cast<Real>(config.head_dropout), ctx.training, ctx.rng);
  }
  return core::max_pool1d(y);
}

Var forward_embed(const ModelWeights& weights, const ModelConfig& config, const Var& features,
                  ForwardContext& ctx) {
  const core::Shape expected{config.sequence_length, config.channels};
  if (features.shape() != expected) {
    throw ContractError("forward_embed: input " + core::to_string(features.shape()) +
                        " does not match configured " + core::to_string(expected));
  }
  Var temporal = run_branch(features, weights.temporal, config.temporal_heads, config, ctx);
  Var channel =
      run_branch(core::transpose(features), weights.channel, config.channel_heads, config, ctx);
  const Var pooled[] = {core::transpose(temporal), core::transpose(channel)};
  Var joined = core::concat(pooled, 1);
  return core::softmax(apply_linear(joined, weights.output, ctx.tape));
}

Embedding embed(const ModelWeights& weights, const ModelConfig& config,
                const data::FeatureSequence& sequence) {
  core::ParameterTape tape(false);
  ForwardContext ctx{tape, false, nullptr};
  Var out = forward_embed(weights, config, core::constant(sequence.values), ctx);
  const auto values = out.value().data();
  return Embedding{{values.begin(), values.end()}};
}

double distance(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw DimensionError("distance: embedding sizes differ (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
  double total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]);
    total += diff * diff;
  }
  return std::sqrt(total);
}

}  // namespace model
KEYFORMER_END_NAMESPACE
