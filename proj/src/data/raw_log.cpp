#include "keyformer/data/raw_log.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace data {

namespace {

constexpr double kMaxMalformedFraction = 0.10;

std::vector<std::string> split_fields(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"') {
      if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else {
        quoted = !quoted;
      }
    } else if (c == delimiter && !quoted) {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool parse_number(const std::string& text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  if (first == last) return false;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw SchemaError("missing required column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

LogSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema file " + path.string() + ": " + e.what());
  }
  LogSchema schema;
  schema.subject = j.value("subject", schema.subject);
  schema.session = j.value("session", schema.session);
  schema.press = j.value("press", schema.press);
  schema.release = j.value("release", schema.release);
  schema.key_code = j.value("key_code", schema.key_code);
  return schema;
}

ParseReport parse_raw_log_text(const std::string& text, const LogSchema& schema) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("keystroke log is empty (header row required)");
  strip_cr(line);
  const char delimiter = line.find('\t') != std::string::npos ? '\t' : ',';
  const std::vector<std::string> header = split_fields(line, delimiter);
  const std::size_t subject_col = column_index(header, schema.subject);
  const std::size_t session_col = column_index(header, schema.session);
  const std::size_t press_col = column_index(header, schema.press);
  const std::size_t release_col = column_index(header, schema.release);
  const std::size_t key_col = column_index(header, schema.key_code);
  const std::size_t needed =
      std::max({subject_col, session_col, press_col, release_col, key_col}) + 1;

  ParseReport report;
  std::unordered_map<std::string, std::size_t> slot;  // "subject\0session" -> index
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    ++report.rows;
    const std::vector<std::string> fields = split_fields(line, delimiter);
    double press = 0, release = 0, key = 0;
    if (fields.size() < needed || fields[subject_col].empty() || fields[session_col].empty() ||
        !parse_number(fields[press_col], press) || !parse_number(fields[release_col], release) ||
        !parse_number(fields[key_col], key) || release < press) {
      ++report.skipped_rows;
      continue;
    }
    const std::string key_id = fields[subject_col] + '\0' + fields[session_col];
    auto [it, inserted] = slot.try_emplace(key_id, report.sessions.size());
    if (inserted) report.sessions.push_back({fields[subject_col], fields[session_col], {}});
    const int code = static_cast<int>(std::clamp(std::lround(key), 0L, 255L));
    report.sessions[it->second].events.push_back({code, press, release});
  }
  if (report.rows > 0 &&
      static_cast<double>(report.skipped_rows) > kMaxMalformedFraction * report.rows) {
    throw SchemaError(std::to_string(report.skipped_rows) + " of " +
                      std::to_string(report.rows) + " rows are malformed (limit 10%)");
  }
  for (Session& s : report.sessions) sort_events(s.events);
  return report;
}

ParseReport parse_raw_log(const std::filesystem::path& path, const LogSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open keystroke log " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("error reading keystroke log " + path.string());
  return parse_raw_log_text(buffer.str(), schema);
}

void write_raw_log(const std::filesystem::path& path, std::span<const Session> sessions) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write keystroke log " + path.string());
  const LogSchema schema;
  out << schema.subject << '\t' << schema.session << '\t' << schema.press << '\t'
      << schema.release << '\t' << schema.key_code << '\n';
  char buffer[64];
  for (const Session& s : sessions) {
    for (const KeystrokeEvent& e : s.events) {
      std::snprintf(buffer, sizeof(buffer), "%.17g\t%.17g\t%d", e.press_ms, e.release_ms,
                    e.key_code);
      out << s.subject_id << '\t' << s.session_id << '\t' << buffer << '\n';
    }
  }
  if (!out) throw IoError("error writing keystroke log " + path.string());
}

}  // namespace data
KEYFORMER_END_NAMESPACE
