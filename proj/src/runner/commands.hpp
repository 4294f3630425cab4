#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefrank/runner/manifest.hpp"

namespace prefrank::runner {

enum class FlagKind { kInt, kUint, kDouble, kString, kBool, kUintList, kDoubleList, kStringList };

// A command-line flag that overrides one config entry.
struct FlagSpec {
  std::string name;  // without dashes
  std::string key;   // dotted config path
  FlagKind kind = FlagKind::kString;
  std::string help;
};

// Runs a prepared command against its output directory.
using Execution = std::function<void(OutputDir& out, std::ostream& log)>;

struct Command {
  std::string name;
  std::string help;
  std::function<nlohmann::json()> defaults;
  std::vector<FlagSpec> flags;
  // Turns a resolved config into an execution. Throws ConfigError for values
  // that are well-typed but invalid; touches no files.
  std::function<Execution(const nlohmann::json& config)> prepare;
};

const std::vector<Command>& Commands();
const Command* FindCommand(const std::string& name);

}  // namespace prefrank::runner
