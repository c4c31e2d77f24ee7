#include "keyformer/service/server.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "httplib.h"

KEYFORMER_BEGIN_NAMESPACE
namespace service {

namespace {

constexpr const char* kJson = "application/json";

void send_error(httplib::Response& res, int status, const std::string& message,
                const std::string& field = {}) {
  nlohmann::json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  res.status = status;
  res.set_content(body.dump(), kJson);
}

double number_field(const nlohmann::json& event, const char* key, const std::string& where) {
  const std::string field = where + "." + key;
  if (!event.contains(key)) throw RequestError(field, field + " is required");
  const auto& v = event.at(key);
  if (!v.is_number()) throw RequestError(field, field + " must be a number");
  const double value = v.get<double>();
  if (!std::isfinite(value)) throw RequestError(field, field + " must be finite");
  return value;
}

}  // namespace

ServiceConfig service_config_from_json(const nlohmann::json& j) {
  ServiceConfig c;
  try {
    if (j.contains("model")) c.model = j.at("model").get<std::string>();
    if (j.contains("store")) c.store = j.at("store").get<std::string>();
    if (j.contains("bind")) c.set_bind(j.at("bind").get<std::string>());
    if (j.contains("threshold_policy")) {
      const auto policy = j.at("threshold_policy").get<std::string>();
      if (policy == "global") c.threshold_policy = ThresholdSource::kGlobal;
      else if (policy == "per_user") c.threshold_policy = ThresholdSource::kPerUser;
      else throw ConfigError("threshold_policy must be \"global\" or \"per_user\", got \"" + policy + "\"");
    }
    if (j.contains("threshold") && !j.at("threshold").is_null()) {
      c.threshold = j.at("threshold").get<double>();
    }
    if (j.contains("cors_origins")) {
      c.cors_origins = j.at("cors_origins").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("service config: ") + e.what());
  }
  return c;
}

ServiceConfig ServiceConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open service config " + path.string());
  try {
    return service_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void ServiceConfig::set_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw ConfigError("bind address must be host:port, got " + bind);
  const std::string port_text = bind.substr(colon + 1);
  char* end = nullptr;
  const long value = std::strtol(port_text.c_str(), &end, 10);
  if (port_text.empty() || *end != '\0' || value < 0 || value > 65535) {
    throw ConfigError("invalid port in bind address " + bind);
  }
  host = bind.substr(0, colon);
  port = static_cast<int>(value);
}

void ServiceConfig::apply_environment() {
  if (const char* v = std::getenv("KEYFORMER_MODEL"); v && *v) model = v;
  if (const char* v = std::getenv("KEYFORMER_STORE"); v && *v) store = v;
  if (const char* v = std::getenv("KEYFORMER_BIND"); v && *v) set_bind(v);
}

SessionRequest parse_session_request(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw RequestError("body", std::string("body is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw RequestError("body", "body must be a JSON object");
  SessionRequest out;
  if (!j.contains("user_id")) throw RequestError("user_id", "user_id is required");
  if (!j["user_id"].is_string()) throw RequestError("user_id", "user_id must be a string");
  out.user_id = j["user_id"].get<std::string>();
  if (out.user_id.empty()) throw RequestError("user_id", "user_id must not be empty");
  if (!j.contains("events")) throw RequestError("events", "events is required");
  if (!j["events"].is_array()) throw RequestError("events", "events must be an array");
  const auto& events = j["events"];
  for (std::size_t i = 0; i < events.size(); ++i) {
    const std::string where = "events[" + std::to_string(i) + "]";
    const auto& e = events[i];
    if (!e.is_object()) throw RequestError(where, where + " must be an object");
    if (!e.contains("key_code")) throw RequestError(where + ".key_code", where + ".key_code is required");
    if (!e["key_code"].is_number_integer()) {
      throw RequestError(where + ".key_code", where + ".key_code must be an integer");
    }
    data::KeystrokeEvent event;
    const auto code = e["key_code"].get<std::int64_t>();
    if (code < 0 || code > 255) {
      throw RequestError(where + ".key_code", where + ".key_code must be in [0, 255]");
    }
    event.key_code = static_cast<int>(code);
    event.press_ms = number_field(e, "press_ms", where);
    event.release_ms = number_field(e, "release_ms", where);
    if (event.release_ms < event.press_ms) {
      throw RequestError(where + ".release_ms", where + ".release_ms must be >= press_ms");
    }
    out.events.push_back(event);
  }
  return out;
}

struct Service::Impl {
  httplib::Server server;
  std::vector<std::string> cors_origins;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  bool origin_allowed(const std::string& origin) const {
    return std::find(cors_origins.begin(), cors_origins.end(), "*") != cors_origins.end() ||
           std::find(cors_origins.begin(), cors_origins.end(), origin) != cors_origins.end();
  }
};

Service::Service(const ServiceConfig& config)
    : Service(std::make_shared<const Verifier>(
                  Verifier::from_file(config.model, config.threshold, config.threshold_policy)),
              std::make_shared<TemplateStore>(config.store), config.cors_origins) {
  if (!verifier_->global_threshold() && config.threshold_policy == ThresholdSource::kGlobal) {
    throw ConfigError("model " + config.model.string() +
                      " carries no global threshold; run `evaluate --calibrate` or set "
                      "\"threshold\" in the service config");
  }
}

Service::Service(std::shared_ptr<const Verifier> verifier, std::shared_ptr<TemplateStore> store,
                 std::vector<std::string> cors_origins)
    : verifier_(std::move(verifier)), store_(std::move(store)), impl_(std::make_unique<Impl>()) {
  impl_->cors_origins = std::move(cors_origins);
  httplib::Server& srv = impl_->server;
  Impl* impl = impl_.get();
  const Verifier* verifier_ptr = verifier_.get();
  TemplateStore* store_ptr = store_.get();

  srv.set_post_routing_handler([impl](const httplib::Request& req, httplib::Response& res) {
    const std::string origin = req.get_header_value("Origin");
    if (origin.empty() || !impl->origin_allowed(origin)) return;
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Vary", "Origin");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  srv.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  srv.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          send_error(res, 500, e.what());
        } catch (...) {
          send_error(res, 500, "internal error");
        }
      });

  // Shared front half of /enroll and /verify: parse, check the event count,
  // embed. Returns nullopt after writing the error response.
  auto prepare = [verifier_ptr](const httplib::Request& req, httplib::Response& res)
      -> std::optional<std::pair<std::string, model::Embedding>> {
    SessionRequest request;
    try {
      request = parse_session_request(req.body);
    } catch (const RequestError& e) {
      send_error(res, 400, e.what(), e.field());
      return std::nullopt;
    }
    if (request.events.size() < 2) {
      send_error(res, 422,
                 "at least 2 events are required, got " + std::to_string(request.events.size()),
                 "events");
      return std::nullopt;
    }
    return std::make_pair(request.user_id, verifier_ptr->embed(request.events));
  };

  srv.Post("/api/v1/enroll", [prepare, store_ptr](const httplib::Request& req,
                                                  httplib::Response& res) {
    auto prepared = prepare(req, res);
    if (!prepared) return;
    const TemplateRecord record =
        store_ptr->enrol(prepared->first, std::move(prepared->second), now_ms());
    res.set_content(nlohmann::json{{"user_id", record.user_id},
                                   {"sessions_enrolled", record.sessions_enrolled()}}
                        .dump(),
                    kJson);
  });

  srv.Post("/api/v1/verify", [prepare, store_ptr, verifier_ptr](const httplib::Request& req,
                                                                httplib::Response& res) {
    auto prepared = prepare(req, res);
    if (!prepared) return;
    const auto record = store_ptr->get(prepared->first);
    if (!record) {
      send_error(res, 404, "unknown user " + prepared->first, "user_id");
      return;
    }
    res.set_content(to_json(verifier_ptr->verify(*record, prepared->second)).dump(), kJson);
  });

  srv.Get("/api/v1/users", [store_ptr](const httplib::Request&, httplib::Response& res) {
    nlohmann::json users = nlohmann::json::array();
    for (const TemplateRecord& r : store_ptr->list()) {
      users.push_back({{"user_id", r.user_id}, {"sessions_enrolled", r.sessions_enrolled()}});
    }
    res.set_content(users.dump(), kJson);
  });

  srv.Delete(R"(/api/v1/users/([^/]+))", [store_ptr](const httplib::Request& req,
                                                     httplib::Response& res) {
    const std::string id = httplib::detail::decode_url(req.matches[1].str(), false);
    if (!store_ptr->remove(id)) {
      send_error(res, 404, "unknown user " + id, "user_id");
      return;
    }
    res.status = 204;
  });

  srv.Get("/api/v1/health", [impl, verifier_ptr](const httplib::Request&, httplib::Response& res) {
    const double uptime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - impl->started).count();
    res.set_content(
        nlohmann::json{{"model_checksum", verifier_ptr->model_checksum()}, {"uptime_s", uptime}}
            .dump(),
        kJson);
  });
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host + " to a free port");
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_) impl_->server.stop();
}

bool Service::wait_until_ready(std::chrono::milliseconds timeout) const {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!impl_->server.is_running()) {
    if (std::chrono::steady_clock::now() > deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return true;
}

}  // namespace service
KEYFORMER_END_NAMESPACE
