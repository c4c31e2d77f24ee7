#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"

#include "keyformer/data/split.hpp"
#include "keyformer/data/synthetic.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace data {

/// Data-directory manifest: subject splits and, for generated data, the
/// profiles that produced it.
struct Manifest {
  std::optional<DatasetSplit> split;
  std::optional<std::uint64_t> split_seed;
  std::vector<SyntheticProfile> profiles;
  std::optional<std::uint64_t> synthetic_seed;
  std::size_t sequence_length = kDefaultSequenceLength;
};

void to_json(nlohmann::json& j, const DatasetSplit& split);
void from_json(const nlohmann::json& j, DatasetSplit& split);
void to_json(nlohmann::json& j, const SyntheticProfile& profile);
void from_json(const nlohmann::json& j, SyntheticProfile& profile);

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
/// Returns an empty manifest when the file does not exist.
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace data
KEYFORMER_END_NAMESPACE
