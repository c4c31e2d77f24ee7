#include "keyformer/data/keystroke.hpp"

#include <algorithm>
#include <unordered_map>

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace data {

void sort_events(std::vector<KeystrokeEvent>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const KeystrokeEvent& a, const KeystrokeEvent& b) {
                     return a.press_ms < b.press_ms;
                   });
}

core::Tensor compute_feature_rows(std::span<const KeystrokeEvent> events) {
  if (events.empty()) throw ContractError("cannot extract features from an empty session");
  constexpr double kMsToSeconds = 1e-3;
  const std::size_t n = events.size();
  core::Tensor rows({n, kFeatureCount});
  for (std::size_t i = 0; i < n; ++i) {
    const KeystrokeEvent& e = events[i];
    Real* row = rows.raw() + i * kFeatureCount;
    row[0] = static_cast<Real>((e.release_ms - e.press_ms) * kMsToSeconds);
    if (i + 1 < n) {
      const KeystrokeEvent& next = events[i + 1];
      row[1] = static_cast<Real>((next.press_ms - e.release_ms) * kMsToSeconds);
      row[2] = static_cast<Real>((next.press_ms - e.press_ms) * kMsToSeconds);
      row[3] = static_cast<Real>((next.release_ms - e.release_ms) * kMsToSeconds);
    }
    const int key = std::clamp(e.key_code, 0, 255);
    row[4] = static_cast<Real>(static_cast<double>(key) / 255.0);
  }
  return rows;
}

FeatureSequence pad_or_slice(const core::Tensor& rows, std::size_t length) {
  if (length == 0) throw ContractError("pad_or_slice: length must be >= 1");
  if (rows.rank() != 2 || rows.dim(1) != kFeatureCount) {
    throw DimensionError("pad_or_slice: expected an n×5 matrix, got " +
                         core::to_string(rows.shape()));
  }
  const std::size_t n = rows.dim(0);
  if (n == 0) throw ContractError("pad_or_slice: zero-row input");
  FeatureSequence out;
  out.true_length = std::min(n, length);
  out.values = core::Tensor({length, kFeatureCount});
  std::copy_n(rows.raw(), out.true_length * kFeatureCount, out.values.raw());
  return out;
}

FeatureSequence extract_features(const Session& session, std::size_t length) {
  if (session.events.empty()) {
    throw ContractError("session " + session.subject_id + "/" + session.session_id +
                        " has no events");
  }
  FeatureSequence out = pad_or_slice(compute_feature_rows(session.events), length);
  out.subject_id = session.subject_id;
  out.session_id = session.session_id;
  return out;
}

std::vector<SubjectGroup> group_by_subject(std::span<const FeatureSequence> sequences) {
  std::vector<SubjectGroup> groups;
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(sequences[i].subject_id, groups.size());
    if (inserted) groups.push_back({sequences[i].subject_id, {}});
    groups[it->second].indices.push_back(i);
  }
  return groups;
}

}  // namespace data
KEYFORMER_END_NAMESPACE
