#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "mjnd/synthetic.hpp"

namespace mjnd::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& stem) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / (stem + "-" + std::to_string(rng()));
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
  std::filesystem::path path_;
};

/// Synthetic archive shared by every test in the process.
inline const std::filesystem::path& shared_archive() {
  static TempDir dir("mjnd-archive");
  static bool written = [] {
    write_synthetic_archive(dir.path(), 3);
    return true;
  }();
  (void)written;
  return dir.path();
}

}  // namespace mjnd::test
