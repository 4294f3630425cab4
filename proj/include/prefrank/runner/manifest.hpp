#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace prefrank::runner {

// `git describe` of the build, or "unknown" when it was not available at
// configure time.
std::string GitDescribe();

// UTC, ISO 8601 with milliseconds.
std::string FormatTimestamp(std::chrono::system_clock::time_point t);

struct OutputRecord {
  std::string file;
  std::uint64_t bytes = 0;
  std::string fnv1a;  // 16 hex digits
};

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string git_describe;
  std::string start_time;
  std::string end_time;
  double wall_clock_seconds = 0.0;
  std::vector<OutputRecord> outputs;
  std::optional<std::string> error;

  // Adds "config_digest", the FNV-1a of the config's compact dump.
  nlohmann::json ToJson() const;
};

// The output directory of one run. Files can only be created directly inside
// it, under plain names; every file created is recorded for the manifest.
class OutputDir {
 public:
  // Creates the directory (and parents) if needed.
  explicit OutputDir(std::string root);

  // Full path for `name`. Throws std::invalid_argument unless `name` is a
  // plain file name (no separators, not "." or ".."). Records the name.
  std::string Path(const std::string& name);
  // Writes `content` to `name` in binary mode.
  void Write(const std::string& name, const std::string& content);
  // Path of a subdirectory, created on demand. Files in it are not listed.
  std::string Subdirectory(const std::string& name);

  // Size and digest of every recorded file that exists, sorted by name.
  std::vector<OutputRecord> Records() const;
  const std::string& root() const { return root_; }

 private:
  static void CheckName(const std::string& name);

  std::string root_;
  std::vector<std::string> names_;
};

// Writes `manifest` as `manifest.json` in `root` (pretty-printed).
void WriteManifest(const std::string& root, const RunManifest& manifest);

}  // namespace prefrank::runner
