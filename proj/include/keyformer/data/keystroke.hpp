#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "keyformer/core/tensor.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace data {

inline constexpr std::size_t kFeatureCount = 5;
inline constexpr std::size_t kDefaultSequenceLength = 50;

/// Column order of a FeatureSequence row.
enum class Feature : std::size_t {
  kHoldLatency = 0,
  kInterKeyLatency = 1,
  kPressLatency = 2,
  kReleaseLatency = 3,
  kKeyCode = 4,
};

/// One press/release action. Times are milliseconds; logs carry integers but
/// browser captures may carry fractional values.
struct KeystrokeEvent {
  int key_code = 0;
  double press_ms = 0.0;
  double release_ms = 0.0;

  friend bool operator==(const KeystrokeEvent&, const KeystrokeEvent&) = default;
};

/// Events of one typing session, sorted by press time.
struct Session {
  std::string subject_id;
  std::string session_id;
  std::vector<KeystrokeEvent> events;

  friend bool operator==(const Session&, const Session&) = default;
};

/// Fixed-length model input: L rows of [HL, IL, PL, RL, KEY]. Rows at index
/// >= true_length are zero.
struct FeatureSequence {
  std::string subject_id;
  std::string session_id;
  std::size_t true_length = 0;
  core::Tensor values;  // L×5

  std::size_t length() const { return values.rank() == 2 ? values.dim(0) : 0; }
  friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;
};

/// Stable sort by press time; ties keep their original order.
void sort_events(std::vector<KeystrokeEvent>& events);

/// Per-event timing features (seconds) and normalised key code, one row per
/// event. The last event has no successor, so its IL/PL/RL are zero.
core::Tensor compute_feature_rows(std::span<const KeystrokeEvent> events);

/// Keeps the first `length` rows or appends zero rows up to `length`.
FeatureSequence pad_or_slice(const core::Tensor& rows, std::size_t length);

/// compute_feature_rows followed by pad_or_slice; carries the session ids.
FeatureSequence extract_features(const Session& session,
                                 std::size_t length = kDefaultSequenceLength);

/// Sessions grouped by subject, subjects and sessions in first-seen order.
struct SubjectGroup {
  std::string subject_id;
  std::vector<std::size_t> indices;  // into the source sequence list
};
std::vector<SubjectGroup> group_by_subject(std::span<const FeatureSequence> sequences);

}  // namespace data
KEYFORMER_END_NAMESPACE
