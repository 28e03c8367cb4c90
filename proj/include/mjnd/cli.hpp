#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace mjnd {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kDataRootEnv = "MJND_DATA_ROOT";

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitPrerequisite = 3;

/// Runs one pipeline stage. `args` excludes the program name. Returns the
/// process exit code; diagnostics go to `err`, results to `out`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Fixed layout of a run directory.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path classifier(const std::string& arch) const { return root / "classifiers" / (arch + ".ckpt"); }
  std::filesystem::path labels(const std::string& split) const { return root / "labels" / (split + ".lbl"); }
  std::filesystem::path cams(const std::string& split) const { return root / "cams" / (split + ".cam"); }
  std::filesystem::path jnd_dir() const { return root / "jnd"; }
  std::filesystem::path eval_dir() const { return root / "eval"; }
  std::filesystem::path visuals_dir() const { return root / "visuals"; }
  std::filesystem::path report() const { return root / "report.md"; }
};

}  // namespace mjnd
