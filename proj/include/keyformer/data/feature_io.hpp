#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "keyformer/data/keystroke.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace data {

/// One JSON object per line:
///   {"subject_id":..,"session_id":..,"true_length":n,"values":[L*5 reals]}
/// Reals are written with "%.9g", which round-trips 32-bit floats exactly.
std::string format_feature_line(const FeatureSequence& sequence);
FeatureSequence parse_feature_line(const std::string& line);

void write_features(const std::filesystem::path& path, std::span<const FeatureSequence> sequences);
std::vector<FeatureSequence> read_features(const std::filesystem::path& path);

/// Conventional file names inside a data directory.
inline constexpr const char* kFeaturesFile = "features.jsonl";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kRawLogFile = "raw_keystrokes.tsv";

}  // namespace data
KEYFORMER_END_NAMESPACE
