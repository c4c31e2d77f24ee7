#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "keyformer/data/keystroke.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace data {

/// Header names of the five required columns.
struct LogSchema {
  std::string subject = "PARTICIPANT_ID";
  std::string session = "TEST_SECTION_ID";
  std::string press = "PRESS_TIME";
  std::string release = "RELEASE_TIME";
  std::string key_code = "KEYCODE";
};

/// Reads a JSON object mapping {subject, session, press, release, key_code}
/// to header names. Missing keys keep their canonical defaults.
LogSchema load_schema(const std::filesystem::path& path);

struct ParseReport {
  std::vector<Session> sessions;
  std::size_t rows = 0;
  std::size_t skipped_rows = 0;
};

/// Parses a delimited keystroke log. The delimiter (tab or comma) is taken from
/// the header row. Malformed rows are counted and skipped; more than 10% of
/// data rows malformed is a SchemaError. Sessions appear in first-seen order
/// with events sorted by press time. Key codes outside [0, 255] are clamped.
ParseReport parse_raw_log(const std::filesystem::path& path, const LogSchema& schema = {});
ParseReport parse_raw_log_text(const std::string& text, const LogSchema& schema = {});

/// Writes sessions as a tab-separated log with the canonical header.
void write_raw_log(const std::filesystem::path& path, std::span<const Session> sessions);

}  // namespace data
KEYFORMER_END_NAMESPACE
