#include "keyformer/model/config.hpp"

#include <string>

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace model {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid model config: " + what); };
  if (sequence_length == 0) fail("sequence_length must be >= 1");
  if (channels == 0) fail("channels must be >= 1");
  if (temporal_ranges == 0 || channel_ranges == 0) fail("Gaussian range counts must be >= 1");
  if (model_width == 0) fail("model_width must be >= 1");
  if (temporal_heads == 0 || model_width % temporal_heads != 0) {
    fail("model_width " + std::to_string(model_width) + " not divisible by temporal_heads " +
         std::to_string(temporal_heads));
  }
  if (channel_heads == 0 || model_width % channel_heads != 0) {
    fail("model_width " + std::to_string(model_width) + " not divisible by channel_heads " +
         std::to_string(channel_heads));
  }
  if (scale_kernels.empty()) fail("scale_kernels must not be empty");
  for (std::size_t k : scale_kernels)
    if (k == 0) fail("kernel sizes must be >= 1");
  for (std::size_t k : head_kernels)
    if (k == 0) fail("kernel sizes must be >= 1");
  if (!(scale_dropout >= 0 && scale_dropout < 1)) fail("scale_dropout must lie in [0, 1)");
  if (!(head_dropout >= 0 && head_dropout < 1)) fail("head_dropout must lie in [0, 1)");
  if (embedding_size == 0) fail("embedding_size must be >= 1");
  if (!(norm_epsilon > 0)) fail("norm_epsilon must be > 0");
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.sequence_length = 8;
  c.temporal_ranges = 3;
  c.channel_ranges = 3;
  c.temporal_layers = 1;
  c.channel_layers = 1;
  c.temporal_heads = 2;
  c.channel_heads = 1;
  c.model_width = 8;
  c.embedding_size = 4;
  return c;
}

ModelConfig ModelConfig::reduced() {
  ModelConfig c;
  c.temporal_layers = 2;
  c.channel_layers = 1;
  c.model_width = 20;
  c.temporal_ranges = 5;
  c.channel_ranges = 5;
  c.embedding_size = 16;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"sequence_length", c.sequence_length},
       {"channels", c.channels},
       {"temporal_ranges", c.temporal_ranges},
       {"channel_ranges", c.channel_ranges},
       {"temporal_layers", c.temporal_layers},
       {"channel_layers", c.channel_layers},
       {"temporal_heads", c.temporal_heads},
       {"channel_heads", c.channel_heads},
       {"model_width", c.model_width},
       {"scale_kernels", c.scale_kernels},
       {"scale_dropout", c.scale_dropout},
       {"head_kernels", c.head_kernels},
       {"head_dropout", c.head_dropout},
       {"embedding_size", c.embedding_size},
       {"norm_epsilon", c.norm_epsilon},
       {"scale_normalisation", c.scale_normalisation}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  const ModelConfig d = c;
  c.sequence_length = j.value("sequence_length", d.sequence_length);
  c.channels = j.value("channels", d.channels);
  c.temporal_ranges = j.value("temporal_ranges", d.temporal_ranges);
  c.channel_ranges = j.value("channel_ranges", d.channel_ranges);
  c.temporal_layers = j.value("temporal_layers", d.temporal_layers);
  c.channel_layers = j.value("channel_layers", d.channel_layers);
  c.temporal_heads = j.value("temporal_heads", d.temporal_heads);
  c.channel_heads = j.value("channel_heads", d.channel_heads);
  c.model_width = j.value("model_width", d.model_width);
  c.scale_kernels = j.value("scale_kernels", d.scale_kernels);
  c.scale_dropout = j.value("scale_dropout", d.scale_dropout);
  c.head_kernels = j.value("head_kernels", d.head_kernels);
  c.head_dropout = j.value("head_dropout", d.head_dropout);
  c.embedding_size = j.value("embedding_size", d.embedding_size);
  c.norm_epsilon = j.value("norm_epsilon", d.norm_epsilon);
  c.scale_normalisation = j.value("scale_normalisation", d.scale_normalisation);
}

}  // namespace model
KEYFORMER_END_NAMESPACE
