#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "keyformer/model/transformer.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace service {

/// Enrolment cap; the oldest embedding is evicted beyond it.
inline constexpr std::size_t kMaxEnrolment = 10;

struct TemplateRecord {
  std::string user_id;
  std::vector<model::Embedding> embeddings;
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;
  /// Per-user decision threshold; unset means the service-wide one applies.
  std::optional<double> threshold;

  std::size_t sessions_enrolled() const noexcept { return embeddings.size(); }
};

void to_json(nlohmann::json& j, const TemplateRecord& r);
void from_json(const nlohmann::json& j, TemplateRecord& r);

/// What replaying the log found.
struct StoreRecovery {
  std::size_t records = 0;
  /// Bytes cut from the tail because the first damaged record started there.
  std::uint64_t truncated_bytes = 0;
};

/// Append-only template log with an in-memory index.
///
/// Each record is [u32 payload length][u32 CRC-32 of payload][JSON payload],
/// holding either the full new state of one user or a deletion. Opening
/// replays the log in order and truncates the file at the first record that
/// is short, fails its checksum or does not parse, so a torn final write
/// costs only that write. Writers are serialised and fsync'd; readers share
/// the index.
class TemplateStore {
 public:
  explicit TemplateStore(std::filesystem::path path);
  TemplateStore(const TemplateStore&) = delete;
  TemplateStore& operator=(const TemplateStore&) = delete;

  const StoreRecovery& recovery() const noexcept { return recovery_; }
  const std::filesystem::path& path() const noexcept { return path_; }

  std::optional<TemplateRecord> get(const std::string& user_id) const;
  /// Every record, ordered by user_id.
  std::vector<TemplateRecord> list() const;

  /// Adds one enrolment embedding, creating the user if needed.
  TemplateRecord enrol(const std::string& user_id, model::Embedding embedding, std::int64_t now_ms);
  /// Sets or clears a user's threshold; nullopt when the user is unknown.
  std::optional<TemplateRecord> set_threshold(const std::string& user_id,
                                              std::optional<double> threshold,
                                              std::int64_t now_ms);
  /// False when the user is unknown.
  bool remove(const std::string& user_id);

 private:
  void append(const nlohmann::json& payload);

  std::filesystem::path path_;
  StoreRecovery recovery_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, TemplateRecord> index_;
};

/// Milliseconds since the Unix epoch.
std::int64_t now_ms();

}  // namespace service
KEYFORMER_END_NAMESPACE
