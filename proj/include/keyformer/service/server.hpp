#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "keyformer/core/error.hpp"
#include "keyformer/service/verifier.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace service {

struct ServiceConfig {
  std::filesystem::path model;
  std::filesystem::path store;
  std::string host = "127.0.0.1";
  int port = 8080;
  ThresholdSource threshold_policy = ThresholdSource::kGlobal;
  /// Overrides the checkpoint's global threshold.
  std::optional<double> threshold;
  /// Origins granted CORS access; "*" admits any.
  std::vector<std::string> cors_origins;

  /// Reads a JSON config; keys: model, store, bind ("host:port"),
  /// threshold_policy ("global" | "per_user"), threshold, cors_origins.
  static ServiceConfig load(const std::filesystem::path& path);
  /// Applies KEYFORMER_MODEL, KEYFORMER_STORE and KEYFORMER_BIND when set.
  void apply_environment();
  void set_bind(const std::string& bind);
};

ServiceConfig service_config_from_json(const nlohmann::json& j);

/// Parsed /enroll and /verify body.
struct SessionRequest {
  std::string user_id;
  std::vector<data::KeystrokeEvent> events;
};

/// Field-level validation failure of a request body.
class RequestError : public Error {
 public:
  RequestError(std::string field, const std::string& message)
      : Error(message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Throws RequestError naming the first bad field. Event counts are not
/// checked here.
SessionRequest parse_session_request(const std::string& body);

/// HTTP front end over a Verifier and a TemplateStore.
class Service {
 public:
  explicit Service(const ServiceConfig& config);
  Service(std::shared_ptr<const Verifier> verifier, std::shared_ptr<TemplateStore> store,
          std::vector<std::string> cors_origins = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds without serving; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Requires a prior bind().
  void run();
  void stop();
  /// Blocks until run() is accepting connections or the timeout passes.
  bool wait_until_ready(std::chrono::milliseconds timeout = std::chrono::seconds(5)) const;

  const Verifier& verifier() const noexcept { return *verifier_; }
  TemplateStore& store() noexcept { return *store_; }

 private:
  struct Impl;
  std::shared_ptr<const Verifier> verifier_;
  std::shared_ptr<TemplateStore> store_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace service
KEYFORMER_END_NAMESPACE
