#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>

#include "keyformer/model/config.hpp"
#include "keyformer/model/weights.hpp"
#include "keyformer/training/adam.hpp"
#include "keyformer/training/config.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace training {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  model::ModelConfig model_config;
  TrainConfig train_config;
  model::ModelWeights weights;
  std::optional<AdamState> adam;
  /// Completed epochs; 0 for untrained weights.
  std::size_t epoch = 0;
  /// NaN until a validation pass has run.
  double best_validation_eer = std::numeric_limits<double>::quiet_NaN();
  /// Decision threshold shipped to the verification service.
  std::optional<double> global_threshold;
};

/// Layout: 8-byte magic, u32 version, u64 header length, JSON header
/// (configs, shape manifest, seed, epoch, validation EER, threshold, Adam
/// step), little-endian float32 tensors in manifest order (then Adam m and v
/// when present), and a CRC-32 of everything before it. Written to a
/// temporary file and renamed into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// Verifies the checksum before decoding anything, then the version and the
/// shape manifest against the header's model config. Throws CheckpointError
/// with expected-vs-found detail.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Same, additionally requiring the stored model config to equal `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const model::ModelConfig& expected);

/// CRC-32 trailer of a checkpoint file as 8 lowercase hex digits.
std::string checkpoint_checksum(const std::filesystem::path& path);

}  // namespace training
KEYFORMER_END_NAMESPACE
