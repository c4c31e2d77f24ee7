#pragma once

#include <cstddef>
#include <vector>

#include "json.hpp"
#include "keyformer/core/precision.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace model {

/// Architecture hyperparameters. Defaults are the full-size configuration.
struct ModelConfig {
  std::size_t sequence_length = 50;  // L
  std::size_t channels = 5;          // C
  std::size_t temporal_ranges = 20;  // Gaussian ranges, temporal branch
  std::size_t channel_ranges = 20;   // Gaussian ranges, channel branch
  std::size_t temporal_layers = 10;
  std::size_t channel_layers = 1;
  std::size_t temporal_heads = 10;
  std::size_t channel_heads = 5;
  std::size_t model_width = 50;  // d_model of both branches
  std::vector<std::size_t> scale_kernels{1, 3, 5};
  double scale_dropout = 0.1;
  std::vector<std::size_t> head_kernels{128, 32};
  double head_dropout = 0.5;
  std::size_t embedding_size = 64;  // S
  double norm_epsilon = 1e-5;
  /// Normalisation inside the multi-scale CNN sub-layer. Tests switch it off
  /// to observe the raw branch sum.
  bool scale_normalisation = true;

  /// Throws ConfigError on inconsistent values.
  void validate() const;

  /// L=8, G=3, N=1, H=1, 2/1 heads, d_model=8, S=4.
  static ModelConfig tiny();
  /// N=2, H=1, d_model=20, G=5, S=16 on L=50.
  static ModelConfig reduced();

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
/// Missing keys keep their defaults, so partial overrides are accepted.
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace model
KEYFORMER_END_NAMESPACE
