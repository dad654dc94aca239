#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "tif/nn/random.hpp"
#include "tif/nn/tensor.hpp"

namespace tif::testing {

inline nn::Tensor random_tensor(nn::Shape shape, nn::Rng& rng, double lo = -1.0, double hi = 1.0) {
  nn::Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline nn::Parameter random_param(const std::string& name, nn::Shape shape, nn::Rng& rng) {
  return nn::Parameter(name, random_tensor(std::move(shape), rng));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("tif_" + tag + "_" + std::to_string(counter()++));
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

 private:
  static std::uint64_t& counter() {
    static std::uint64_t n = static_cast<std::uint64_t>(::getpid()) * 1000;
    return n;
  }
  std::filesystem::path path_;
};

}  // namespace tif::testing
