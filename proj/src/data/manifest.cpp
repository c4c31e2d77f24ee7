#include "keyformer/data/manifest.hpp"

#include <fstream>

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace data {

void to_json(nlohmann::json& j, const DatasetSplit& split) {
  j = {{"train", split.train}, {"validation", split.validation}, {"test", split.test}};
}

void from_json(const nlohmann::json& j, DatasetSplit& split) {
  j.at("train").get_to(split.train);
  j.at("validation").get_to(split.validation);
  j.at("test").get_to(split.test);
}

void to_json(nlohmann::json& j, const SyntheticProfile& p) {
  j = {{"subject_id", p.subject_id},
       {"hold_mean_ms", p.hold_mean_ms},
       {"hold_std_ms", p.hold_std_ms},
       {"interkey_mean_ms", p.interkey_mean_ms},
       {"interkey_std_ms", p.interkey_std_ms},
       {"keys", p.keys},
       {"key_preferences", p.key_preferences},
       {"session_jitter", p.session_jitter}};
}

void from_json(const nlohmann::json& j, SyntheticProfile& p) {
  j.at("subject_id").get_to(p.subject_id);
  j.at("hold_mean_ms").get_to(p.hold_mean_ms);
  j.at("hold_std_ms").get_to(p.hold_std_ms);
  j.at("interkey_mean_ms").get_to(p.interkey_mean_ms);
  j.at("interkey_std_ms").get_to(p.interkey_std_ms);
  j.at("keys").get_to(p.keys);
  j.at("key_preferences").get_to(p.key_preferences);
  j.at("session_jitter").get_to(p.session_jitter);
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  nlohmann::json j;
  j["sequence_length"] = manifest.sequence_length;
  if (manifest.split) {
    j["split"] = *manifest.split;
    j["split"]["sizes"] = {{"train", manifest.split->train.size()},
                           {"validation", manifest.split->validation.size()},
                           {"test", manifest.split->test.size()}};
  }
  if (manifest.split_seed) j["split_seed"] = *manifest.split_seed;
  if (manifest.synthetic_seed) j["synthetic_seed"] = *manifest.synthetic_seed;
  if (!manifest.profiles.empty()) j["profiles"] = manifest.profiles;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("error writing manifest " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  Manifest manifest;
  if (!std::filesystem::exists(path)) return manifest;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    manifest.sequence_length = j.value("sequence_length", kDefaultSequenceLength);
    if (j.contains("split")) manifest.split = j["split"].get<DatasetSplit>();
    if (j.contains("split_seed")) manifest.split_seed = j["split_seed"].get<std::uint64_t>();
    if (j.contains("synthetic_seed"))
      manifest.synthetic_seed = j["synthetic_seed"].get<std::uint64_t>();
    if (j.contains("profiles")) j["profiles"].get_to(manifest.profiles);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("manifest " + path.string() + ": " + e.what());
  }
  return manifest;
}

}  // namespace data
KEYFORMER_END_NAMESPACE
