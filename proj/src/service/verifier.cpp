#include "keyformer/service/verifier.hpp"

#include "keyformer/core/error.hpp"
#include "keyformer/evaluation/eer.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace service {

nlohmann::json to_json(const VerifyDecision& d) {
  return {{"distance", d.distance},
          {"threshold", d.threshold},
          {"accepted", d.accepted},
          {"model_checksum", d.model_checksum}};
}

Verifier::Verifier(training::Checkpoint checkpoint, std::string model_checksum,
                   std::optional<double> global_threshold, ThresholdSource source)
    : checkpoint_(std::move(checkpoint)), checksum_(std::move(model_checksum)), source_(source) {
  global_threshold_ = global_threshold ? global_threshold : checkpoint_.global_threshold;
}

Verifier Verifier::from_file(const std::filesystem::path& checkpoint,
                             std::optional<double> global_threshold, ThresholdSource source) {
  return Verifier(training::load_checkpoint(checkpoint), training::checkpoint_checksum(checkpoint),
                  global_threshold, source);
}

model::Embedding Verifier::embed(std::span<const data::KeystrokeEvent> events) const {
  if (events.size() < 2) {
    throw ProtocolError("a session needs at least 2 events, got " + std::to_string(events.size()));
  }
  data::Session session;
  session.events.assign(events.begin(), events.end());
  data::sort_events(session.events);
  const data::FeatureSequence features =
      data::extract_features(session, checkpoint_.model_config.sequence_length);
  return model::embed(checkpoint_.weights, checkpoint_.model_config, features);
}

double Verifier::threshold_for(const TemplateRecord& record) const {
  if (source_ == ThresholdSource::kPerUser && record.threshold) return *record.threshold;
  if (!global_threshold_) {
    throw ConfigError(
        "no decision threshold for user " + record.user_id +
        ": the checkpoint carries none; calibrate it with `evaluate --calibrate` or set one in "
        "the service config");
  }
  return *global_threshold_;
}

VerifyDecision Verifier::verify(const TemplateRecord& record, const model::Embedding& probe) const {
  if (record.embeddings.empty()) {
    throw ContractError("user " + record.user_id + " has no enrolment sessions");
  }
  double total = 0;
  for (const model::Embedding& e : record.embeddings) total += model::distance(probe, e);
  VerifyDecision d;
  d.distance = total / static_cast<double>(record.embeddings.size());
  d.threshold = threshold_for(record);
  d.accepted = d.distance <= d.threshold;
  d.model_checksum = checksum_;
  return d;
}

double calibrate_threshold(const evaluation::ScoreSet& scores) {
  return evaluation::compute_eer(scores.genuine, scores.impostor).threshold;
}

}  // namespace service
KEYFORMER_END_NAMESPACE
