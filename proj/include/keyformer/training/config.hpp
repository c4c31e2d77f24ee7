#pragma once

#include <cstddef>
#include <cstdint>

#include "json.hpp"
#include "keyformer/core/precision.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace training {

/// Optimisation settings. Defaults are the full-scale schedule.
struct TrainConfig {
  std::size_t epochs = 1000;
  std::size_t batches_per_epoch = 29;
  std::size_t batch_size = 1024;
  double learning_rate = 1e-3;
  double margin = 1.0;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Training subjects scored for the per-epoch train EER (0 disables it).
  std::size_t train_eval_subjects = 50;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace training
KEYFORMER_END_NAMESPACE
