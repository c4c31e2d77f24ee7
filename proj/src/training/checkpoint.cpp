#include "keyformer/training/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "keyformer/core/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

KEYFORMER_BEGIN_NAMESPACE
namespace training {

namespace {

constexpr char kMagic[8] = {'K', 'F', 'C', 'K', 'P', 'T', '\0', '\1'};
constexpr std::size_t kPreambleSize = sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t);

std::uint32_t crc_of(const char* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  while (size > 0) {
    const uInt piece = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), piece);
    data += piece;
    size -= piece;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string hex(std::uint32_t value) {
  char buffer[9];
  std::snprintf(buffer, sizeof(buffer), "%08x", value);
  return buffer;
}

template <class T>
void put(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <class T>
T get(const std::string& in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

void put_tensor(std::string& out, const core::Tensor& t) {
  for (Real v : t.data()) put(out, static_cast<float>(v));
}

nlohmann::json manifest_json(const model::ShapeManifest& manifest) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [name, shape] : manifest) out.push_back({{"name", name}, {"shape", shape}});
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path) {
  const model::ShapeManifest manifest = model::shape_manifest(cp.weights);
  const model::ShapeManifest expected =
      model::shape_manifest(model::allocate_weights(cp.model_config));
  if (manifest != expected) {
    throw CheckpointError("save_checkpoint: weights do not match the model config");
  }
  nlohmann::json header = {
      {"format_version", kCheckpointVersion},
      {"model_config", cp.model_config},
      {"train_config", cp.train_config},
      {"shape_manifest", manifest_json(manifest)},
      {"seed", cp.train_config.seed},
      {"epoch", cp.epoch},
      {"best_validation_eer",
       std::isfinite(cp.best_validation_eer) ? nlohmann::json(cp.best_validation_eer) : nullptr},
      {"global_threshold", cp.global_threshold ? nlohmann::json(*cp.global_threshold) : nullptr},
      {"has_adam", cp.adam.has_value()},
      {"adam_step", cp.adam ? cp.adam->step : 0},
  };
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put(out, kCheckpointVersion);
  put(out, static_cast<std::uint64_t>(text.size()));
  out += text;
  const auto params = model::parameter_list(cp.weights);
  for (const core::Tensor* t : params) put_tensor(out, *t);
  if (cp.adam) {
    if (cp.adam->m.size() != params.size() || cp.adam->v.size() != params.size()) {
      throw CheckpointError("save_checkpoint: Adam state has " + std::to_string(cp.adam->m.size()) +
                            " moments for " + std::to_string(params.size()) + " parameters");
    }
    for (const core::Tensor& t : cp.adam->m) put_tensor(out, t);
    for (const core::Tensor& t : cp.adam->v) put_tensor(out, t);
  }
  put(out, crc_of(out.data(), out.size()));

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write checkpoint " + tmp.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("error writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string where = "checkpoint " + path.string() + ": ";
  if (bytes.size() < kPreambleSize + sizeof(std::uint32_t)) {
    throw CheckpointError(where + "file is " + std::to_string(bytes.size()) +
                          " bytes, too short to be a checkpoint");
  }
  const std::size_t body = bytes.size() - sizeof(std::uint32_t);
  const std::uint32_t stored = get<std::uint32_t>(bytes, body);
  const std::uint32_t actual = crc_of(bytes.data(), body);
  if (stored != actual) {
    throw CheckpointError(where + "checksum mismatch (expected " + hex(stored) + ", found " +
                          hex(actual) + "); file is truncated or corrupt");
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(where + "not a checkpoint file (bad magic)");
  }
  const auto version = get<std::uint32_t>(bytes, sizeof(kMagic));
  if (version != kCheckpointVersion) {
    throw CheckpointError(where + "format version mismatch (expected " +
                          std::to_string(kCheckpointVersion) + ", found " +
                          std::to_string(version) + ")");
  }
  const auto header_size = get<std::uint64_t>(bytes, sizeof(kMagic) + sizeof(std::uint32_t));
  if (header_size > body - kPreambleSize) throw CheckpointError(where + "header length out of range");

  Checkpoint cp;
  std::vector<std::pair<std::string, core::Shape>> stored_manifest;
  bool has_adam = false;
  std::uint64_t adam_step = 0;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(kPreambleSize, header_size));
    cp.model_config = header.at("model_config").get<model::ModelConfig>();
    cp.train_config = header.at("train_config").get<TrainConfig>();
    cp.epoch = header.at("epoch").get<std::size_t>();
    const auto& eer = header.at("best_validation_eer");
    cp.best_validation_eer = eer.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                           : eer.get<double>();
    const auto& threshold = header.at("global_threshold");
    if (!threshold.is_null()) cp.global_threshold = threshold.get<double>();
    has_adam = header.at("has_adam").get<bool>();
    adam_step = header.at("adam_step").get<std::uint64_t>();
    for (const auto& entry : header.at("shape_manifest")) {
      stored_manifest.emplace_back(entry.at("name").get<std::string>(),
                                   entry.at("shape").get<core::Shape>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(where + "malformed header: " + e.what());
  }
  try {
    cp.model_config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(where + e.what());
  }

  cp.weights = model::allocate_weights(cp.model_config);
  const model::ShapeManifest expected = model::shape_manifest(cp.weights);
  if (stored_manifest.size() != expected.size()) {
    throw CheckpointError(where + "shape manifest lists " + std::to_string(stored_manifest.size()) +
                          " tensors, model config implies " + std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (stored_manifest[i] != expected[i]) {
      throw CheckpointError(where + "tensor " + std::to_string(i) + " expected " +
                            expected[i].first + " " + core::to_string(expected[i].second) +
                            ", found " + stored_manifest[i].first + " " +
                            core::to_string(stored_manifest[i].second));
    }
  }

  const auto params = model::parameter_list(cp.weights);
  std::size_t floats = 0;
  for (const core::Tensor* t : params) floats += t->size();
  const std::size_t payload = body - kPreambleSize - header_size;
  const std::size_t needed = floats * (has_adam ? 3 : 1) * sizeof(float);
  if (payload != needed) {
    throw CheckpointError(where + "tensor payload is " + std::to_string(payload) +
                          " bytes, manifest requires " + std::to_string(needed));
  }
  std::size_t offset = kPreambleSize + header_size;
  auto read_into = [&](core::Tensor& t) {
    for (Real& v : t.data()) {
      v = static_cast<Real>(get<float>(bytes, offset));
      offset += sizeof(float);
    }
  };
  for (core::Tensor* t : params) read_into(*t);
  if (has_adam) {
    AdamState adam = AdamState::zeros_like(model::parameter_list(std::as_const(cp.weights)));
    for (core::Tensor& t : adam.m) read_into(t);
    for (core::Tensor& t : adam.v) read_into(t);
    adam.step = adam_step;
    cp.adam = std::move(adam);
  }
  return cp;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const model::ModelConfig& expected) {
  Checkpoint cp = load_checkpoint(path);
  if (!(cp.model_config == expected)) {
    throw CheckpointError("checkpoint " + path.string() + ": model config mismatch (expected " +
                          nlohmann::json(expected).dump() + ", found " +
                          nlohmann::json(cp.model_config).dump() + ")");
  }
  return cp;
}

std::string checkpoint_checksum(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < sizeof(std::uint32_t)) throw CheckpointError("checkpoint " + path.string() + " is empty");
  return hex(get<std::uint32_t>(bytes, bytes.size() - sizeof(std::uint32_t)));
}

}  // namespace training
KEYFORMER_END_NAMESPACE
