#include "prefrank/runner/manifest.hpp"

#include <algorithm>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "prefrank/common/hash.hpp"

#ifndef PREFRANK_GIT_DESCRIBE
#define PREFRANK_GIT_DESCRIBE "unknown"
#endif

namespace prefrank::runner {

namespace fs = std::filesystem;

std::string GitDescribe() {
  const std::string d = PREFRANK_GIT_DESCRIBE;
  return d.empty() ? "unknown" : d;
}

std::string FormatTimestamp(std::chrono::system_clock::time_point t) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms % 1000));
  return out;
}

nlohmann::json RunManifest::ToJson() const {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& r : outputs) files.push_back({{"file", r.file}, {"bytes", r.bytes}, {"fnv1a", r.fnv1a}});
  nlohmann::json j = {{"command", command},
                      {"config", config},
                      {"config_digest", Fnv1aHex(config.dump())},
                      {"seed", seed},
                      {"git_describe", git_describe},
                      {"start_time", start_time},
                      {"end_time", end_time},
                      {"wall_clock_seconds", wall_clock_seconds},
                      {"outputs", files}};
  if (error) j["error"] = *error;
  return j;
}

OutputDir::OutputDir(std::string root) : root_(std::move(root)) {
  if (root_.empty()) throw std::invalid_argument("output directory must not be empty");
  fs::create_directories(root_);
}

void OutputDir::CheckName(const std::string& name) {
  if (name.empty() || name == "." || name == ".." || name.find('/') != std::string::npos ||
      name.find('\\') != std::string::npos) {
    throw std::invalid_argument("output name '" + name + "' is not a plain file name");
  }
}

std::string OutputDir::Path(const std::string& name) {
  CheckName(name);
  if (std::find(names_.begin(), names_.end(), name) == names_.end()) names_.push_back(name);
  return (fs::path(root_) / name).string();
}

void OutputDir::Write(const std::string& name, const std::string& content) {
  const std::string path = Path(name);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
}

std::string OutputDir::Subdirectory(const std::string& name) {
  CheckName(name);
  const fs::path p = fs::path(root_) / name;
  fs::create_directories(p);
  return p.string();
}

std::vector<OutputRecord> OutputDir::Records() const {
  std::vector<std::string> names = names_;
  std::sort(names.begin(), names.end());
  std::vector<OutputRecord> records;
  for (const auto& name : names) {
    const fs::path p = fs::path(root_) / name;
    std::ifstream in(p, std::ios::binary);
    if (!in) continue;
    std::ostringstream content;
    content << in.rdbuf();
    const std::string bytes = content.str();
    records.push_back({name, bytes.size(), Fnv1aHex(bytes)});
  }
  return records;
}

void WriteManifest(const std::string& root, const RunManifest& manifest) {
  fs::create_directories(root);
  const fs::path path = fs::path(root) / "manifest.json";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << manifest.ToJson().dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

}  // namespace prefrank::runner
