#include "keyformer/model/weights.hpp"

#include <cmath>

KEYFORMER_BEGIN_NAMESPACE
namespace model {

namespace {

LinearWeights make_linear(std::size_t in, std::size_t out) {
  return {Tensor({in, out}), Tensor({out})};
}

ConvWeights make_conv(std::size_t in, std::size_t out, std::size_t k) {
  return {Tensor({out, in, k}), Tensor({out})};
}

NormWeights make_norm(std::size_t d) { return {Tensor::full({d}, Real(1)), Tensor({d})}; }

BranchWeights make_branch(const ModelConfig& c, std::size_t token_width, std::size_t ranges,
                          std::size_t layers) {
  const std::size_t d = c.model_width;
  BranchWeights b;
  b.input = make_linear(token_width, d);
  b.encoding = {Tensor({ranges}), Tensor({ranges}), Tensor({ranges, d})};
  for (std::size_t i = 0; i < layers; ++i) {
    EncoderLayerWeights layer;
    layer.attention = {make_linear(d, d), make_linear(d, d), make_linear(d, d), make_linear(d, d)};
    layer.attention_norm = make_norm(d);
    for (std::size_t k : c.scale_kernels) layer.scales.push_back(make_conv(d, d, k));
    layer.scale_norm = make_norm(d);
    layer.output_norm = make_norm(d);
    b.layers.push_back(std::move(layer));
  }
  for (std::size_t k : c.head_kernels) b.head.push_back(make_conv(d, d, k));
  return b;
}

void fill_uniform(Tensor& t, std::size_t fan_in, core::Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (Real& v : t.data()) v = static_cast<Real>(rng.uniform(-bound, bound));
}

void init_encoding(RangeEncodingWeights& enc, std::size_t length, core::Rng& rng) {
  const std::size_t ranges = enc.means.size();
  for (std::size_t g = 0; g < ranges; ++g) {
    enc.means[g] = ranges == 1 ? static_cast<Real>(static_cast<double>(length - 1) / 2.0)
                               : static_cast<Real>(static_cast<double>(g) *
                                                   static_cast<double>(length - 1) /
                                                   static_cast<double>(ranges - 1));
  }
  const double target = static_cast<double>(length) / (2.0 * static_cast<double>(ranges));
  // Inverse of softplus(raw) + floor.
  const double raw = std::log(std::expm1(target - kStdFloor));
  enc.raw_stds.fill(static_cast<Real>(raw));
  fill_uniform(enc.range_embeddings, ranges, rng);
}

}  // namespace

ModelWeights allocate_weights(const ModelConfig& config) {
  config.validate();
  ModelWeights w;
  w.temporal = make_branch(config, config.channels, config.temporal_ranges, config.temporal_layers);
  w.channel = make_branch(config, config.sequence_length, config.channel_ranges,
                          config.channel_layers);
  w.output = make_linear(2 * config.model_width, config.embedding_size);
  return w;
}

ModelWeights init_weights(const ModelConfig& config, core::Rng& rng) {
  ModelWeights w = allocate_weights(config);
  // Biases stay zero and norm gains one; the encodings are filled below.
  visit_parameters(w, [&](const std::string& name, Tensor& t) {
    if (name.ends_with(".weight")) {
      fill_uniform(t, t.dim(0), rng);
    } else if (name.ends_with(".kernel")) {
      fill_uniform(t, t.dim(1) * t.dim(2), rng);
    }
  });
  init_encoding(w.temporal.encoding, config.sequence_length, rng);
  init_encoding(w.channel.encoding, config.channels, rng);
  return w;
}

ShapeManifest shape_manifest(const ModelWeights& weights) {
  ShapeManifest manifest;
  visit_parameters(weights, [&](const std::string& name, const Tensor& t) {
    manifest.emplace_back(name, t.shape());
  });
  return manifest;
}

std::size_t parameter_count(const ModelWeights& weights) {
  std::size_t n = 0;
  visit_parameters(weights, [&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

std::vector<Tensor*> parameter_list(ModelWeights& weights) {
  std::vector<Tensor*> out;
  visit_parameters(weights, [&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<const Tensor*> parameter_list(const ModelWeights& weights) {
  std::vector<const Tensor*> out;
  visit_parameters(weights, [&](const std::string&, const Tensor& t) { out.push_back(&t); });
  return out;
}

}  // namespace model
KEYFORMER_END_NAMESPACE
