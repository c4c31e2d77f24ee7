#pragma once

#include <optional>
#include <span>
#include <string>

#include "keyformer/data/keystroke.hpp"
#include "keyformer/evaluation/scores.hpp"
#include "keyformer/service/store.hpp"
#include "keyformer/training/checkpoint.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace service {

struct VerifyDecision {
  /// Mean distance from the probe to the enrolled embeddings.
  double distance = 0;
  double threshold = 0;
  bool accepted = false;
  std::string model_checksum;
};

nlohmann::json to_json(const VerifyDecision& d);

enum class ThresholdSource { kGlobal, kPerUser };

/// Immutable model plus the threshold rules; safe to share across threads.
class Verifier {
 public:
  /// `global_threshold` overrides the checkpoint's. Without either, decisions
  /// need a per-user threshold.
  Verifier(training::Checkpoint checkpoint, std::string model_checksum,
           std::optional<double> global_threshold = std::nullopt,
           ThresholdSource source = ThresholdSource::kGlobal);

  static Verifier from_file(const std::filesystem::path& checkpoint,
                            std::optional<double> global_threshold = std::nullopt,
                            ThresholdSource source = ThresholdSource::kGlobal);

  /// Embeds a raw session. Throws ProtocolError with fewer than 2 events.
  model::Embedding embed(std::span<const data::KeystrokeEvent> events) const;

  /// The user's own threshold under kPerUser when set, else the global one.
  /// Throws ConfigError when neither exists.
  double threshold_for(const TemplateRecord& record) const;
  VerifyDecision verify(const TemplateRecord& record, const model::Embedding& probe) const;

  const std::optional<double>& global_threshold() const noexcept { return global_threshold_; }
  const std::string& model_checksum() const noexcept { return checksum_; }
  const model::ModelConfig& config() const noexcept { return checkpoint_.model_config; }
  const model::ModelWeights& weights() const noexcept { return checkpoint_.weights; }

 private:
  training::Checkpoint checkpoint_;
  std::string checksum_;
  std::optional<double> global_threshold_;
  ThresholdSource source_;
};

/// Threshold at the EER operating point of a score set.
double calibrate_threshold(const evaluation::ScoreSet& scores);

}  // namespace service
KEYFORMER_END_NAMESPACE
