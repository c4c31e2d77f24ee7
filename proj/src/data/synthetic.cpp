#include "keyformer/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace data {

namespace {

// Lower-case letters, space, and a few punctuation / editing keys.
std::vector<int> key_alphabet() {
  std::vector<int> keys;
  for (int c = 'a'; c <= 'z'; ++c) keys.push_back(c);
  keys.insert(keys.end(), {' ', '.', ',', 8, 16});
  return keys;
}

double lognormal(double mean, double stddev, core::Rng& rng) {
  const double sigma2 = std::log1p((stddev * stddev) / (mean * mean));
  const double mu = std::log(mean) - 0.5 * sigma2;
  return std::exp(mu + std::sqrt(sigma2) * rng.normal());
}

std::size_t sample_index(const std::vector<double>& weights, core::Rng& rng) {
  double u = rng.uniform();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

}  // namespace

SyntheticProfile random_profile(std::string subject_id, core::Rng& rng) {
  SyntheticProfile p;
  p.subject_id = std::move(subject_id);
  p.hold_mean_ms = rng.uniform(60.0, 180.0);
  p.hold_std_ms = rng.uniform(0.1, 0.3) * p.hold_mean_ms;
  p.interkey_mean_ms = rng.uniform(40.0, 400.0);
  p.interkey_std_ms = rng.uniform(0.1, 0.3) * p.interkey_mean_ms;
  p.keys = key_alphabet();
  p.key_preferences.resize(p.keys.size());
  double total = 0;
  for (double& w : p.key_preferences) {
    w = std::exp(rng.normal());
    total += w;
  }
  for (double& w : p.key_preferences) w /= total;
  p.session_jitter = rng.uniform(0.02, 0.08);
  return p;
}

std::vector<Session> generate_sessions(const SyntheticProfile& profile,
                                       std::size_t sessions_per_subject,
                                       std::size_t events_per_session, core::Rng& rng) {
  if (sessions_per_subject == 0 || events_per_session == 0) {
    throw ContractError("synthetic generation needs at least one session and one event");
  }
  if (!(profile.hold_std_ms > 0) || !(profile.interkey_std_ms > 0) || profile.keys.empty() ||
      profile.keys.size() != profile.key_preferences.size()) {
    throw ContractError("invalid synthetic profile for " + profile.subject_id);
  }
  std::vector<Session> sessions;
  sessions.reserve(sessions_per_subject);
  for (std::size_t s = 0; s < sessions_per_subject; ++s) {
    const double hold_factor = std::max(0.5, 1.0 + profile.session_jitter * rng.normal());
    const double interkey_factor = std::max(0.5, 1.0 + profile.session_jitter * rng.normal());
    Session session;
    session.subject_id = profile.subject_id;
    session.session_id = std::to_string(s + 1);
    session.events.reserve(events_per_session);
    double press = std::floor(rng.uniform(0.0, 1000.0));
    for (std::size_t e = 0; e < events_per_session; ++e) {
      const double hold = std::max(
          1.0, std::round(lognormal(profile.hold_mean_ms * hold_factor,
                                    profile.hold_std_ms * hold_factor, rng)));
      const int key = profile.keys[sample_index(profile.key_preferences, rng)];
      session.events.push_back({key, press, press + hold});
      const double interkey = std::round(rng.normal(profile.interkey_mean_ms * interkey_factor,
                                                    profile.interkey_std_ms * interkey_factor));
      press = std::max(press + 1.0, press + hold + interkey);
    }
    sessions.push_back(std::move(session));
  }
  return sessions;
}

SyntheticDataset generate_synthetic(std::size_t num_subjects, std::size_t sessions_per_subject,
                                    std::size_t events_per_session, std::uint64_t seed) {
  if (num_subjects == 0) throw ContractError("synthetic generation needs at least one subject");
  SyntheticDataset out;
  out.profiles.reserve(num_subjects);
  for (std::size_t i = 0; i < num_subjects; ++i) {
    core::Rng rng(core::Rng::derive(seed, {0x5359'4E54ULL, i}));
    char id[32];
    std::snprintf(id, sizeof(id), "s%04zu", i + 1);
    SyntheticProfile profile = random_profile(id, rng);
    auto sessions = generate_sessions(profile, sessions_per_subject, events_per_session, rng);
    out.sessions.insert(out.sessions.end(), std::make_move_iterator(sessions.begin()),
                        std::make_move_iterator(sessions.end()));
    out.profiles.push_back(std::move(profile));
  }
  return out;
}

}  // namespace data
KEYFORMER_END_NAMESPACE
