#include "keyformer/data/feature_io.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace data {

std::string format_feature_line(const FeatureSequence& sequence) {
  std::string line = "{\"subject_id\":";
  line += nlohmann::json(sequence.subject_id).dump();
  line += ",\"session_id\":";
  line += nlohmann::json(sequence.session_id).dump();
  line += ",\"true_length\":" + std::to_string(sequence.true_length) + ",\"values\":[";
  char buffer[32];
  const auto values = sequence.values.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) line += ',';
    std::snprintf(buffer, sizeof(buffer), "%.9g", static_cast<double>(values[i]));
    line += buffer;
  }
  line += "]}";
  return line;
}

FeatureSequence parse_feature_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed feature record: ") + e.what());
  }
  FeatureSequence out;
  try {
    out.subject_id = j.at("subject_id").get<std::string>();
    out.session_id = j.at("session_id").get<std::string>();
    out.true_length = j.at("true_length").get<std::size_t>();
    const auto& values = j.at("values");
    if (values.empty() || values.size() % kFeatureCount != 0) {
      throw SchemaError("feature record for " + out.subject_id + "/" + out.session_id +
                        " has " + std::to_string(values.size()) +
                        " values, not a multiple of 5");
    }
    std::vector<Real> data;
    data.reserve(values.size());
    for (const auto& v : values) data.push_back(static_cast<Real>(v.get<double>()));
    const std::size_t length = data.size() / kFeatureCount;
    if (out.true_length < 1 || out.true_length > length) {
      throw SchemaError("feature record for " + out.subject_id + "/" + out.session_id +
                        " has true_length outside [1, L]");
    }
    out.values = core::Tensor({length, kFeatureCount}, std::move(data));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed feature record: ") + e.what());
  }
  return out;
}

void write_features(const std::filesystem::path& path, std::span<const FeatureSequence> sequences) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write features file " + path.string());
  for (const FeatureSequence& s : sequences) out << format_feature_line(s) << '\n';
  if (!out) throw IoError("error writing features file " + path.string());
}

std::vector<FeatureSequence> read_features(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open features file " + path.string());
  std::vector<FeatureSequence> sequences;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    sequences.push_back(parse_feature_line(line));
  }
  return sequences;
}

}  // namespace data
KEYFORMER_END_NAMESPACE
