#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "keyformer/core/rng.hpp"
#include "keyformer/data/keystroke.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace data {

/// Typing behaviour of one synthetic subject. Latencies are milliseconds.
struct SyntheticProfile {
  std::string subject_id;
  double hold_mean_ms = 0;
  double hold_std_ms = 0;
  double interkey_mean_ms = 0;
  double interkey_std_ms = 0;
  std::vector<int> keys;                 // candidate key codes
  std::vector<double> key_preferences;   // sums to 1, parallel to keys
  double session_jitter = 0;             // relative std of per-session drift
};

/// Profile with hold mean in [60, 180] ms, inter-key mean in [40, 400] ms,
/// standard deviations 10-30% of the means.
SyntheticProfile random_profile(std::string subject_id, core::Rng& rng);

/// Sessions typed by one profile. Hold times are log-normal (strictly
/// positive); press times never decrease.
std::vector<Session> generate_sessions(const SyntheticProfile& profile,
                                       std::size_t sessions_per_subject,
                                       std::size_t events_per_session, core::Rng& rng);

struct SyntheticDataset {
  std::vector<Session> sessions;
  std::vector<SyntheticProfile> profiles;
};

/// Each subject draws from its own stream derived from `seed`, so output does
/// not depend on generation order.
SyntheticDataset generate_synthetic(std::size_t num_subjects, std::size_t sessions_per_subject,
                                    std::size_t events_per_session, std::uint64_t seed);

}  // namespace data
KEYFORMER_END_NAMESPACE
