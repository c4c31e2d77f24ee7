#include "keyformer/service/store.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <chrono>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace service {

namespace {

constexpr std::size_t kRecordHeader = 2 * sizeof(std::uint32_t);
// Guards replay against a corrupted length field claiming gigabytes.
constexpr std::uint32_t kMaxPayload = 64u << 20;

std::uint32_t crc_of(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(bytes.data()),
            static_cast<uInt>(bytes.size())));
}

std::uint32_t read_u32(const std::string& bytes, std::size_t offset) {
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + offset, sizeof(v));
  return v;
}

}  // namespace

void to_json(nlohmann::json& j, const TemplateRecord& r) {
  nlohmann::json embeddings = nlohmann::json::array();
  for (const model::Embedding& e : r.embeddings) embeddings.push_back(e.values);
  j = {{"user_id", r.user_id},
       {"embeddings", std::move(embeddings)},
       {"created_ms", r.created_ms},
       {"updated_ms", r.updated_ms},
       {"threshold", r.threshold ? nlohmann::json(*r.threshold) : nullptr}};
}

void from_json(const nlohmann::json& j, TemplateRecord& r) {
  r.user_id = j.at("user_id").get<std::string>();
  r.embeddings.clear();
  for (const auto& e : j.at("embeddings")) {
    r.embeddings.push_back(model::Embedding{e.get<std::vector<Real>>()});
  }
  r.created_ms = j.at("created_ms").get<std::int64_t>();
  r.updated_ms = j.at("updated_ms").get<std::int64_t>();
  const auto& t = j.at("threshold");
  r.threshold = t.is_null() ? std::nullopt : std::optional<double>(t.get<double>());
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

TemplateStore::TemplateStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::string bytes;
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw IoError("cannot open template store " + path_.string());
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    if (bytes.size() - offset < kRecordHeader) break;
    const std::uint32_t length = read_u32(bytes, offset);
    const std::uint32_t crc = read_u32(bytes, offset + sizeof(std::uint32_t));
    if (length > kMaxPayload || bytes.size() - offset - kRecordHeader < length) break;
    const std::string_view payload(bytes.data() + offset + kRecordHeader, length);
    if (crc_of(payload) != crc) break;
    try {
      const auto j = nlohmann::json::parse(payload);
      const auto op = j.at("op").get<std::string>();
      if (op == "put") {
        TemplateRecord record = j.at("record").get<TemplateRecord>();
        const std::string id = record.user_id;
        index_[id] = std::move(record);
      } else if (op == "delete") {
        index_.erase(j.at("user_id").get<std::string>());
      } else {
        break;
      }
    } catch (const nlohmann::json::exception&) {
      break;
    }
    offset += kRecordHeader + length;
    ++recovery_.records;
  }
  if (offset < bytes.size()) {
    recovery_.truncated_bytes = bytes.size() - offset;
    std::filesystem::resize_file(path_, offset);
  }
}

std::optional<TemplateRecord> TemplateStore::get(const std::string& user_id) const {
  std::shared_lock lock(mutex_);
  auto it = index_.find(user_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<TemplateRecord> TemplateStore::list() const {
  std::shared_lock lock(mutex_);
  std::vector<TemplateRecord> out;
  out.reserve(index_.size());
  for (const auto& [id, record] : index_) out.push_back(record);
  return out;
}

TemplateRecord TemplateStore::enrol(const std::string& user_id, model::Embedding embedding,
                                    std::int64_t now) {
  std::unique_lock lock(mutex_);
  TemplateRecord record;
  if (auto it = index_.find(user_id); it != index_.end()) {
    record = it->second;
  } else {
    record.user_id = user_id;
    record.created_ms = now;
  }
  if (!record.embeddings.empty() && record.embeddings.front().size() != embedding.size()) {
    throw DimensionError("user " + user_id + " holds " +
                         std::to_string(record.embeddings.front().size()) +
                         "-dimensional embeddings, got " + std::to_string(embedding.size()));
  }
  record.embeddings.push_back(std::move(embedding));
  if (record.embeddings.size() > kMaxEnrolment) {
    record.embeddings.erase(record.embeddings.begin(),
                            record.embeddings.end() - static_cast<std::ptrdiff_t>(kMaxEnrolment));
  }
  record.updated_ms = now;
  append({{"op", "put"}, {"record", record}});
  index_[user_id] = record;
  return record;
}

std::optional<TemplateRecord> TemplateStore::set_threshold(const std::string& user_id,
                                                           std::optional<double> threshold,
                                                           std::int64_t now) {
  std::unique_lock lock(mutex_);
  auto it = index_.find(user_id);
  if (it == index_.end()) return std::nullopt;
  TemplateRecord record = it->second;
  record.threshold = threshold;
  record.updated_ms = now;
  append({{"op", "put"}, {"record", record}});
  it->second = record;
  return record;
}

bool TemplateStore::remove(const std::string& user_id) {
  std::unique_lock lock(mutex_);
  if (!index_.contains(user_id)) return false;
  append({{"op", "delete"}, {"user_id", user_id}});
  index_.erase(user_id);
  return true;
}

void TemplateStore::append(const nlohmann::json& payload) {
  const std::string text = payload.dump();
  std::string record(kRecordHeader, '\0');
  const auto length = static_cast<std::uint32_t>(text.size());
  const std::uint32_t crc = crc_of(text);
  std::memcpy(record.data(), &length, sizeof(length));
  std::memcpy(record.data() + sizeof(length), &crc, sizeof(crc));
  record += text;

  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot open template store " + path_.string() + ": " + std::strerror(errno));
  std::size_t written = 0;
  while (written < record.size()) {
    const ssize_t n = ::write(fd, record.data() + written, record.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string reason = std::strerror(errno);
      ::close(fd);
      throw IoError("write to template store " + path_.string() + " failed: " + reason);
    }
    written += static_cast<std::size_t>(n);
  }
  const bool synced = ::fsync(fd) == 0;
  ::close(fd);
  if (!synced) throw IoError("fsync of template store " + path_.string() + " failed");
}

}  // namespace service
KEYFORMER_END_NAMESPACE
