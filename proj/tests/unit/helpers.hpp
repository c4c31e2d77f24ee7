#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

#include "keyformer/core/rng.hpp"
#include "keyformer/core/tensor.hpp"

namespace test_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("keyformer_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline keyformer::core::Tensor random_tensor(keyformer::core::Shape shape,
                                             keyformer::core::Rng& rng, double lo = -1.0,
                                             double hi = 1.0) {
  keyformer::core::Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<keyformer::Real>(rng.uniform(lo, hi));
  return t;
}

}  // namespace test_support
