#pragma once

#include <concepts>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "keyformer/core/rng.hpp"
#include "keyformer/core/tensor.hpp"
#include "keyformer/model/config.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace model {

using core::Tensor;

struct LinearWeights {
  Tensor weight;  // in×out
  Tensor bias;    // out
};

struct ConvWeights {
  Tensor kernel;  // out×in×k
  Tensor bias;    // out
};

struct NormWeights {
  Tensor gain;
  Tensor bias;
};

struct AttentionWeights {
  LinearWeights query;
  LinearWeights key;
  LinearWeights value;
  LinearWeights output;
};

struct EncoderLayerWeights {
  AttentionWeights attention;
  NormWeights attention_norm;       // Add & Norm after attention
  std::vector<ConvWeights> scales;  // one per multi-scale kernel size
  NormWeights scale_norm;           // inside the multi-scale CNN
  NormWeights output_norm;          // Add & Norm after the CNN
};

/// Learnable Gaussian range encoding. Effective std = softplus(raw) + floor.
struct RangeEncodingWeights {
  Tensor means;             // G
  Tensor raw_stds;          // G
  Tensor range_embeddings;  // G×d_model
};

struct BranchWeights {
  LinearWeights input;  // token width -> d_model
  RangeEncodingWeights encoding;
  std::vector<EncoderLayerWeights> layers;
  std::vector<ConvWeights> head;
};

struct ModelWeights {
  BranchWeights temporal;
  BranchWeights channel;
  LinearWeights output;  // 2·d_model -> S
};

inline constexpr double kStdFloor = 1e-3;

namespace detail {
template <class L, class F>
void visit_linear(L& w, const std::string& name, F& f) {
  f(name + ".weight", w.weight);
  f(name + ".bias", w.bias);
}
template <class B, class F>
void visit_branch(B& b, const std::string& name, F& f) {
  visit_linear(b.input, name + ".input", f);
  f(name + ".encoding.means", b.encoding.means);
  f(name + ".encoding.raw_stds", b.encoding.raw_stds);
  f(name + ".encoding.range_embeddings", b.encoding.range_embeddings);
  for (std::size_t i = 0; i < b.layers.size(); ++i) {
    auto& layer = b.layers[i];
    const std::string prefix = name + ".layers." + std::to_string(i);
    visit_linear(layer.attention.query, prefix + ".attention.query", f);
    visit_linear(layer.attention.key, prefix + ".attention.key", f);
    visit_linear(layer.attention.value, prefix + ".attention.value", f);
    visit_linear(layer.attention.output, prefix + ".attention.output", f);
    f(prefix + ".attention_norm.gain", layer.attention_norm.gain);
    f(prefix + ".attention_norm.bias", layer.attention_norm.bias);
    for (std::size_t s = 0; s < layer.scales.size(); ++s) {
      f(prefix + ".scales." + std::to_string(s) + ".kernel", layer.scales[s].kernel);
      f(prefix + ".scales." + std::to_string(s) + ".bias", layer.scales[s].bias);
    }
    f(prefix + ".scale_norm.gain", layer.scale_norm.gain);
    f(prefix + ".scale_norm.bias", layer.scale_norm.bias);
    f(prefix + ".output_norm.gain", layer.output_norm.gain);
    f(prefix + ".output_norm.bias", layer.output_norm.bias);
  }
  for (std::size_t i = 0; i < b.head.size(); ++i) {
    f(name + ".head." + std::to_string(i) + ".kernel", b.head[i].kernel);
    f(name + ".head." + std::to_string(i) + ".bias", b.head[i].bias);
  }
}
}  // namespace detail

/// Calls f(name, tensor) for every parameter in the fixed manifest order.
template <class W, class F>
  requires std::same_as<std::remove_const_t<W>, ModelWeights>
void visit_parameters(W& weights, F&& f) {
  detail::visit_branch(weights.temporal, "temporal", f);
  detail::visit_branch(weights.channel, "channel", f);
  detail::visit_linear(weights.output, "output", f);
}

using ShapeManifest = std::vector<std::pair<std::string, core::Shape>>;

/// Zero-filled weights with every shape determined by `config`.
ModelWeights allocate_weights(const ModelConfig& config);
ShapeManifest shape_manifest(const ModelWeights& weights);
std::size_t parameter_count(const ModelWeights& weights);

/// Linear/conv/range-embedding entries ~ U(-sqrt(1/fan_in), +sqrt(1/fan_in)),
/// biases zero, norm gains one, Gaussian means evenly spaced over
/// [0, length-1], effective stds length/(2G).
ModelWeights init_weights(const ModelConfig& config, core::Rng& rng);

/// Pointers to every parameter tensor in manifest order.
std::vector<Tensor*> parameter_list(ModelWeights& weights);
std::vector<const Tensor*> parameter_list(const ModelWeights& weights);

}  // namespace model
KEYFORMER_END_NAMESPACE
